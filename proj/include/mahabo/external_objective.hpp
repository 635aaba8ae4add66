#ifndef MAHABO_EXTERNAL_OBJECTIVE_HPP
#define MAHABO_EXTERNAL_OBJECTIVE_HPP

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <stdexcept>
#include <string>

#include "mahabo/types.hpp"

namespace mahabo {

//! Line-based subprocess objective: the child reads one whitespace-separated
//! D-vector per line on standard input and writes one scalar per line on
//! standard output, flushing after each line. The command is run through
//! /bin/sh -c.
class ExternalObjective {
 public:
  explicit ExternalObjective(std::string command) : command_(std::move(command)) {
    int to_child[2], from_child[2];
    if (pipe(to_child) != 0 || pipe(from_child) != 0)
      throw std::runtime_error("ExternalObjective: pipe failed");
    pid_ = fork();
    if (pid_ < 0) throw std::runtime_error("ExternalObjective: fork failed");
    if (pid_ == 0) {
      dup2(to_child[0], STDIN_FILENO);
      dup2(from_child[1], STDOUT_FILENO);
      close(to_child[0]);
      close(to_child[1]);
      close(from_child[0]);
      close(from_child[1]);
      execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
      std::_Exit(127);
    }
    close(to_child[0]);
    close(from_child[1]);
    to_child_ = fdopen(to_child[1], "w");
    from_child_ = fdopen(from_child[0], "r");
    if (!to_child_ || !from_child_)
      throw std::runtime_error("ExternalObjective: fdopen failed");
  }

  ExternalObjective(const ExternalObjective&) = delete;
  ExternalObjective& operator=(const ExternalObjective&) = delete;

  ~ExternalObjective() {
    if (to_child_) fclose(to_child_);
    if (from_child_) fclose(from_child_);
    if (pid_ > 0) {
      int status = 0;
      waitpid(pid_, &status, 0);
    }
  }

  double eval(const Eigen::VectorXd& x) {
    for (Eigen::Index i = 0; i < x.size(); ++i)
      std::fprintf(to_child_, i == 0 ? "%.17g" : " %.17g", x[i]);
    std::fprintf(to_child_, "\n");
    std::fflush(to_child_);

    char* line = nullptr;
    size_t cap = 0;
    const ssize_t len = getline(&line, &cap, from_child_);
    if (len <= 0) {
      std::free(line);
      throw std::runtime_error("ExternalObjective: child produced no output (command: " +
                               command_ + ")");
    }
    char* end = nullptr;
    const double value = std::strtod(line, &end);
    const bool parsed = end != line;
    std::free(line);
    if (!parsed)
      throw std::runtime_error("ExternalObjective: could not parse child output");
    return value;
  }

 private:
  std::string command_;
  pid_t pid_ = -1;
  std::FILE* to_child_ = nullptr;
  std::FILE* from_child_ = nullptr;
};

}  // namespace mahabo

#endif  // MAHABO_EXTERNAL_OBJECTIVE_HPP
