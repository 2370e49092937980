#include "degenmix/mixing.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#include "degenmix/stats.hpp"
#include "degenmix/transport.hpp"
#include "degenmix/util.hpp"

namespace degenmix {

Eigen::VectorXd ModeProjector::coords(const SpectralField& u) const {
  Eigen::VectorXd c(dim());
  for (int i = 0; i < dim(); ++i) c(i) = hdot(u, fields[static_cast<std::size_t>(i)]);
  return c;
}

ModeProjector make_projector(const ModelParams& params, const TorusSpec& torus, int cutoff,
                             int n_modes) {
  ObservationBasis basis = params.model == Model::NS2D
                               ? ns_observation_basis(torus, cutoff, cutoff)
                               : cgl_observation_basis(torus, cutoff, cutoff);
  std::vector<int> order(static_cast<std::size_t>(basis.size()));
  for (int i = 0; i < basis.size(); ++i) order[static_cast<std::size_t>(i)] = i;
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
    return basis.lambda[static_cast<std::size_t>(x)] < basis.lambda[static_cast<std::size_t>(y)];
  });
  ModeProjector proj;
  int take = std::min(n_modes, basis.size());
  for (int i = 0; i < take; ++i)
    proj.fields.push_back(basis.fields[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]);
  return proj;
}

EnsembleRun run_ensemble(const ModelParams& params, const SolverConfig& cfg,
                         const NoiseSpec& noise, const std::vector<SpectralField>& init,
                         const EnsembleConfig& ecfg, const ModeProjector& proj, RngKey key,
                         int threads) {
  DGM_REQUIRE(static_cast<int>(init.size()) == ecfg.n_traj,
              "run_ensemble: one initial state per trajectory");
  EnsembleRun run;
  int dim = proj.dim();
  run.snapshots.assign(static_cast<std::size_t>(ecfg.k_max) + 1,
                       Eigen::MatrixXd::Zero(ecfg.n_traj, dim));
  if (ecfg.quarter_times)
    run.quarters.assign(static_cast<std::size_t>(ecfg.k_max),
                        {Eigen::MatrixXd::Zero(ecfg.n_traj, dim),
                         Eigen::MatrixXd::Zero(ecfg.n_traj, dim),
                         Eigen::MatrixXd::Zero(ecfg.n_traj, dim)});
  run.mean_norm.assign(static_cast<std::size_t>(ecfg.k_max) + 1, 0.0);

  std::vector<double> norm_acc(static_cast<std::size_t>(ecfg.k_max) + 1, 0.0);
  std::atomic<int> failures{0};

  parallel_for(static_cast<std::size_t>(ecfg.n_traj), threads, [&](std::size_t t) {
    SpectralField u = init[t];
    run.snapshots[0].row(static_cast<Eigen::Index>(t)) = proj.coords(u).transpose();
    for (int k = 0; k < ecfg.k_max; ++k) {
      NoisePath path(&noise, key.sub("mixing").sub(t).sub(static_cast<std::uint64_t>(k)));
      bool need_traj = ecfg.quarter_times;
      try {
        auto res = resolve(params, cfg, u, &path, nullptr, {0.0, 1.0, need_traj});
        if (need_traj) {
          int s = res.traj.n_steps();
          for (int qi = 0; qi < 3; ++qi) {
            const SpectralField& uq = res.traj.at_step((qi + 1) * s / 4);
            run.quarters[static_cast<std::size_t>(k)][static_cast<std::size_t>(qi)].row(
                static_cast<Eigen::Index>(t)) = proj.coords(uq).transpose();
          }
        }
        u = res.u1;
      } catch (const SolverFailure&) {
        failures.fetch_add(1);
        // keep the previous state; the trajectory is frozen and counted
      }
      run.snapshots[static_cast<std::size_t>(k) + 1].row(static_cast<Eigen::Index>(t)) =
          proj.coords(u).transpose();
    }
  });

  for (int k = 0; k <= ecfg.k_max; ++k) {
    double acc = 0.0;
    for (int t = 0; t < ecfg.n_traj; ++t)
      acc += run.snapshots[static_cast<std::size_t>(k)].row(t).norm();
    run.mean_norm[static_cast<std::size_t>(k)] = acc / ecfg.n_traj;
  }
  run.failures = failures.load();
  return run;
}

double dual_lipschitz_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  DGM_REQUIRE(a.rows() == b.rows() && a.rows() > 0, "dual_lipschitz_distance: size mismatch");
  Eigen::MatrixXd cost(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.rows(); ++j)
      cost(i, j) = std::min((a.row(i) - b.row(j)).norm(), 2.0);
  return kantorovich_value(cost);
}

RateFit mixing_rate_fit(const std::vector<double>& dist, const std::vector<double>& floor_dist) {
  DGM_REQUIRE(dist.size() >= 8, "mixing_rate_fit: series too short");
  DGM_REQUIRE(dist.size() == floor_dist.size(), "mixing_rate_fit: floor series size mismatch");
  RateFit fit;
  double floor_avg = 0.0;
  for (double f : floor_dist) floor_avg += f;
  floor_avg /= static_cast<double>(floor_dist.size());
  fit.floor = floor_avg;

  std::vector<double> xs, ys;
  for (std::size_t k = 0; k < dist.size(); ++k) {
    if (dist[k] <= std::max(2.0 * floor_dist[k], 1e-14)) break;  // entered the floor
    xs.push_back(static_cast<double>(k));
    ys.push_back(std::log(dist[k]));
  }
  fit.window = static_cast<int>(xs.size());
  if (xs.size() < 5) {
    fit.measurable = false;
    fit.gamma_hat = 0.0;
    return fit;
  }
  LineFit lf = fit_line(xs, ys);
  fit.gamma_hat = -lf.slope;
  fit.gamma_ci_lo = -lf.slope - lf.slope_ci_half();
  fit.gamma_ci_hi = -lf.slope + lf.slope_ci_half();
  fit.c_hat = std::exp(lf.intercept);
  return fit;
}

StationarityResult stationarity_check(const Eigen::MatrixXd& at_k, const Eigen::MatrixXd& at_k1,
                                      int n_perm, RngKey key) {
  auto rows_of = [](const Eigen::MatrixXd& m) {
    std::vector<std::vector<double>> rows(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      rows[static_cast<std::size_t>(i)].resize(static_cast<std::size_t>(m.cols()));
      for (Eigen::Index j = 0; j < m.cols(); ++j)
        rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = m(i, j);
    }
    return rows;
  };
  StationarityResult res;
  res.p_value = energy_test_pvalue(rows_of(at_k), rows_of(at_k1), n_perm, key);
  res.reject_at_1pct = res.p_value < 0.01;
  return res;
}

}  // namespace degenmix
