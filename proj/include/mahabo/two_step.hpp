#ifndef MAHABO_TWO_STEP_HPP
#define MAHABO_TWO_STEP_HPP

#include <string>
#include <utility>
#include <vector>

#include "mahabo/batch_dpp.hpp"
#include "mahabo/embedding.hpp"

namespace mahabo {

enum class ReconstructionStrategy { kPseudoInverse, kRandomized };

struct TwoStepConfig {
  OptimizerConfig opt;
  DppConfig dpp;
  AcquisitionMode acq_mode = AcquisitionMode::kEst;
  double fixed_beta = 2.0;
  int est_candidates = 512;
  double recon_tol = 1e-12;
  int recon_init_budget = 100;
  bool variance_exploration = false;
};

namespace detail {

template <typename Scalar>
std::pair<VectorX<Scalar>, std::string> reconstruct_query(
    const LinearEmbedding<Scalar>& emb, const VectorX<Scalar>& z,
    ReconstructionStrategy strategy, const BoxDomain<Scalar>& domain, const TwoStepConfig& cfg,
    RngStream& rng) {
  if (strategy == ReconstructionStrategy::kPseudoInverse) {
    const VectorX<Scalar> raw = pseudo_inverse_map(emb, z);
    VectorX<Scalar> x = domain.clip(raw);
    return {std::move(x), domain.contains(raw) ? "" : "pinv_clipped"};
  }
  auto prior = [&](RngStream& r) { return domain.sample(r); };
  auto res = randomized_reconstruct(emb, z, prior, domain, rng, Scalar(cfg.recon_tol),
                                    cfg.recon_init_budget);
  std::string flag;
  if (res.used_fallback) flag = "recon_fallback_pinv";
  if (res.clipped) flag += (flag.empty() ? "" : "|") + std::string("recon_clipped");
  return {std::move(res.x), std::move(flag)};
}

}  // namespace detail

//! Two-step baseline round: fit the low-dimensional RBF surrogate on the
//! projected data (the projected posterior of the Mahalanobis model),
//! optimize the acquisition over the bounding box of the zonotope B X, then
//! map each low-dimensional query back through the chosen reconstruction.
//! Batch completion runs the k-DPP entirely in the low-dimensional space and
//! reconstructs every sampled point.
template <typename Scalar>
BatchSelection<Scalar> two_step_select(const Dataset<Scalar>& data,
                                       const MahaKernelParams<Scalar>& params,
                                       const BoxDomain<Scalar>& domain, int n_batch,
                                       ReconstructionStrategy strategy, const TwoStepConfig& cfg,
                                       RngStream& rng) {
  require(n_batch >= 1, "two_step_select: n_batch must be >= 1");
  params.validate();
  const Index d = params.embed_dim();

  const LinearEmbedding<Scalar> emb(params.embedding);
  const BoxDomain<Scalar> z_box = zonotope_bounding_box(params.embedding, domain);

  // Low-dimensional surrogate: the same kernel on projected inputs is the
  // unit RBF kernel, i.e. an identity embedding.
  MahaKernelParams<Scalar> z_params;
  z_params.gamma = params.gamma;
  z_params.noise_var = params.noise_var;
  z_params.embedding = MatrixX<Scalar>::Identity(d, d);
  const MatrixX<Scalar> Z = data.points() * params.embedding.transpose();
  const GPPosterior<Scalar> z_post = fit_posterior(Z, data.values(), z_params);

  AcquisitionSpec<Scalar> spec;
  if (cfg.acq_mode == AcquisitionMode::kEst) {
    RngStream est_rng = rng.child(1);
    spec = est_beta(z_post, z_box, cfg.est_candidates, est_rng);
  } else {
    spec.beta = Scalar(cfg.fixed_beta);
  }
  spec.variance_exploration = cfg.variance_exploration;

  BatchSelection<Scalar> out;
  auto z_prior = [&](RngStream& r) { return z_box.sample(r); };
  RngStream acq_rng = rng.child(2);
  const auto first = optimize_acquisition(z_post, spec, z_box, cfg.opt, z_prior, acq_rng);
  out.z_queries.push_back(first.x);

  RngStream recon_rng = rng.child(3);
  auto [x1, flag1] = detail::reconstruct_query(emb, first.x, strategy, domain, cfg, recon_rng);
  if (first.degraded) flag1 = flag1.empty() ? "acq_degraded" : flag1 + "|acq_degraded";
  out.points.push_back(std::move(x1));
  out.flags.push_back(std::move(flag1));
  if (n_batch == 1) return out;

  RngStream ucb_rng = rng.child(4);
  const Scalar ucb_min = min_ucb(z_post, spec, z_box, cfg.opt, ucb_rng);
  const auto cond = condition_on_pending(z_post, first.x);
  RelevantRegion<Scalar> region(z_post, spec, Scalar(cfg.dpp.lambda_init), ucb_min);

  DppConfig dpp = cfg.dpp;
  dpp.k = n_batch - 1;
  auto kernel = [&](const VectorX<Scalar>& a, const VectorX<Scalar>& b) {
    return dpp_kernel_eval(cond, a, b);
  };
  auto ground = [&](RngStream& r) { return sample_relevant_region(region, z_box, dpp, r); };
  RngStream gibbs_rng = rng.child(5);
  auto kres = sample_kdpp_gibbs<Scalar>(kernel, ground, dpp, gibbs_rng);
  out.final_lambda = region.lambda();

  std::string dpp_flag = kres.degraded ? "dpp_init_fallback" : "";
  if (region.lambda() > Scalar(cfg.dpp.lambda_init)) {
    if (!dpp_flag.empty()) dpp_flag += "|";
    dpp_flag += "lambda_escalated";
  }
  for (auto& z : kres.points) {
    auto [x, flag] = detail::reconstruct_query(emb, z, strategy, domain, cfg, recon_rng);
    if (!dpp_flag.empty()) flag = flag.empty() ? dpp_flag : flag + "|" + dpp_flag;
    out.z_queries.push_back(std::move(z));
    out.points.push_back(std::move(x));
    out.flags.push_back(std::move(flag));
  }
  return out;
}

}  // namespace mahabo

#endif  // MAHABO_TWO_STEP_HPP
