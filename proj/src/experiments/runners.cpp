#include "internal.hpp"

#include "orbitlab/errors.hpp"
#include "orbitlab/linalg.hpp"
#include "orbitlab/reductions.hpp"
#include "orbitlab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>

namespace orbitlab::expcli::detail {

namespace {

using models::Kind;

Vector column(const Matrix& m) { return Eigen::Map<const Vector>(m.data(), m.size()); }

const std::vector<std::string>& variants_of(const RunContext& ctx) {
  return find_experiment(ctx.rc.config.experiment).variants;
}

models::DatasetSpec dataset(const RunContext& ctx) {
  const auto kind = models::kind_from_string(find_experiment(ctx.rc.config.experiment).model_kind);
  return models::make_dataset(kind, ctx.rc.model_params, ctx.rc.config.seed);
}

/// Records <observable>_<variant> for every variant's final value.
void record_finals(RunContext& ctx, const std::vector<VariantRun>& runs, const std::vector<std::string>& names) {
  for (const auto& run : runs) {
    for (const auto& name : names) ctx.metric(name + "_" + run.variant, run.final_values.at(name));
  }
}

}  // namespace

void run_radial(RunContext& ctx) {
  const auto& rc = ctx.rc;
  auto [spec, data] = models::build_model(Kind::radial, rc.model_params, rc.config.seed);
  const int d = rc.model_params.at("d").get<int>();
  dynamics::DynamicsConfig dyn = rc.dynamics;
  dyn.record_snapshots = false;
  const auto chains = static_cast<std::size_t>(ctx.option("chains"));
  const std::vector<Vector> inits(chains, spec.init);
  const auto trajectories = dynamics::simulate_chains(*spec.model, inits, dyn, {"loss", "r"});

  std::vector<double> samples;
  for (const auto& t : trajectories) {
    const auto& r = t.observables.at("r");
    samples.insert(samples.end(), r.begin(), r.end());
  }
  if (samples.empty()) throw InvalidArgument("radial: no samples recorded after burn-in");

  const double beta_eff = dyn.beta / (dyn.noise_scale * dyn.noise_scale);
  const double r_max = *std::max_element(samples.begin(), samples.end());
  const double hi = std::max(r_max, 1.0 + 12.0 / std::sqrt(beta_eff)) * 1.05;
  const auto grid = stats::linspace(1e-6 * hi, hi, static_cast<std::size_t>(ctx.option("grid_points")));
  const auto gauge = stats::radial_theory_density(d, beta_eff, grid, true);
  const auto naive = stats::radial_theory_density(d, beta_eff, grid, false);
  const auto hist = stats::empirical_density(samples, static_cast<int>(ctx.option("bins")));

  const double ks_gauge = stats::ks_distance(samples, gauge);
  const double ks_naive = stats::ks_distance(samples, naive);
  double mean = 0.0;
  for (double r : samples) mean += r;
  mean /= static_cast<double>(samples.size());
  double gauge_mean = 0.0;
  for (std::size_t k = 1; k < grid.size(); ++k) {
    gauge_mean += 0.5 * (grid[k] - grid[k - 1]) * (grid[k] * gauge.values[k] + grid[k - 1] * gauge.values[k - 1]);
  }

  ctx.metric("ks_gauge", ks_gauge);
  ctx.metric("ks_naive", ks_naive);
  ctx.metric("ks_ratio", ks_naive / ks_gauge);
  ctx.metric("mean_r", mean);
  ctx.metric("samples", static_cast<double>(samples.size()));
  ctx.metric("beta_eff", beta_eff);
  ctx.target("gauge_mode_r", (beta_eff + std::sqrt(beta_eff * beta_eff + 4.0 * beta_eff * (d - 1))) / (2.0 * beta_eff));
  ctx.target("gauge_mean_r", gauge_mean);
  ctx.target("naive_mode_r", 1.0);
  ctx.check("ks_gauge", "<", 0.02, 0.0, "oracle:radial_theory_density(corrected)");
  ctx.check("ks_ratio", ">", 5.0, 0.0, "baseline:radial_theory_density(naive)");
  ctx.report.reference = {{"d", 10}, {"total_steps", 800000}};

  const auto& first = trajectories.front();
  const std::size_t n = first.step_indices.size();
  const std::size_t stride = std::max<std::size_t>(1, n / static_cast<std::size_t>(ctx.option("record_points")));
  SeriesTable& series = ctx.artifacts.series;
  series.columns = {"step", "loss", "r"};
  for (std::size_t k = 0; k < n; k += stride) {
    series.rows.push_back({static_cast<double>(first.step_indices[k]), first.observables.at("loss")[k],
                           first.observables.at("r")[k]});
  }
  ctx.artifacts.files.emplace_back("density_empirical.csv", [hist](const std::filesystem::path& p) { hist.write_csv(p); });
  ctx.artifacts.files.emplace_back("density_gauge.csv", [gauge](const std::filesystem::path& p) { gauge.write_csv(p); });
  ctx.artifacts.files.emplace_back("density_naive.csv", [naive](const std::filesystem::path& p) { naive.write_csv(p); });
  if (rc.config.emit_samples) {
    ctx.artifacts.files.emplace_back("samples.csv", [trajectories](const std::filesystem::path& p) {
      std::ofstream out(p);
      if (!out) throw Error("cannot write " + p.string());
      out << std::setprecision(17) << "chain,step,r\n";
      for (std::size_t c = 0; c < trajectories.size(); ++c) {
        const auto& t = trajectories[c];
        for (std::size_t k = 0; k < t.step_indices.size(); ++k) {
          out << c << ',' << t.step_indices[k] << ',' << t.observables.at("r")[k] << '\n';
        }
      }
    });
  }
}

void run_fourier_sparse(RunContext& ctx) {
  auto data = dataset(ctx);
  const std::vector<std::string> obs = {"loss", "train_mse", "test_mse", "l1"};
  const auto runs = run_variants(ctx, data, variants_of(ctx), obs);
  record_finals(ctx, runs, obs);
  const Vector w_true = column(data.array("w_true"));
  double truth = 0.0;
  for (Index i = 0; i < w_true.size(); ++i) truth += 0.5 * reductions::balanced_scalar(w_true(i)).cost;
  ctx.target("l1_truth", truth);
  ctx.metric("l1_ratio", ctx.report.metrics.at("l1_pq") / ctx.report.metrics.at("l1_naive"));
  ctx.metric("test_mse_ratio", ctx.report.metrics.at("test_mse_pq") / ctx.report.metrics.at("test_mse_naive"));
  ctx.check("l1_ratio", "<", 0.6, 0.0, "baseline:naive");
  ctx.check("test_mse_ratio", "<", 1.0, 0.0, "baseline:naive");
  ctx.report.reference = {{"l1_pq", 4.89}, {"l1_naive", 10.72}};
  ctx.artifacts.series = variant_series(runs, obs);
}

void run_tv_recon(RunContext& ctx) {
  auto data = dataset(ctx);
  const std::vector<std::string> obs = {"loss", "train_mse", "tv", "recon_mse"};
  const auto runs = run_variants(ctx, data, variants_of(ctx), obs);
  record_finals(ctx, runs, obs);
  ctx.target("tv_truth", stats::total_variation(column(data.array("omega_true"))));
  ctx.metric("tv_ratio", ctx.report.metrics.at("tv_naive") / ctx.report.metrics.at("tv_biased"));
  ctx.check("tv_ratio", ">=", 4.0, 0.0, "baseline:naive");
  ctx.check("loss_biased", "<", 1e-2, 0.0, "threshold");
  ctx.check("loss_naive", "<", 1e-2, 0.0, "threshold");
  ctx.report.reference = {{"tv_ratio_lower_bound", 6.0}};
  ctx.artifacts.series = variant_series(runs, obs);
}

void run_multichannel(RunContext& ctx) {
  auto data = dataset(ctx);
  const std::vector<std::string> obs = {"loss", "train_mse", "test_mse", "effective_rank", "nuclear_norm"};
  const auto runs = run_variants(ctx, data, variants_of(ctx), obs);
  record_finals(ctx, runs, obs);
  const auto rank = static_cast<double>(stats::effective_rank(linalg::svd(data.array("W_true")).sigma));
  ctx.target("true_rank", rank);
  auto& m = ctx.report.metrics;
  ctx.metric("test_mse_ratio_naive", m.at("test_mse_matrix") / m.at("test_mse_naive"));
  ctx.metric("test_mse_ratio_scalar", m.at("test_mse_matrix") / m.at("test_mse_scalar"));
  ctx.check("effective_rank_matrix", "==", rank, 0.0, "oracle:effective_rank(W_true)");
  ctx.check("effective_rank_naive", ">", rank, 0.0, "oracle:effective_rank(W_true)");
  ctx.check("effective_rank_scalar", ">", rank, 0.0, "oracle:effective_rank(W_true)");
  ctx.check("test_mse_ratio_naive", "<", 1.0, 0.0, "baseline:naive");
  ctx.check("test_mse_ratio_scalar", "<", 1.0, 0.0, "baseline:scalar");
  ctx.report.reference = {{"true_rank", 2}};
  ctx.artifacts.series = variant_series(runs, obs);
}

void run_rank2_completion(RunContext& ctx) {
  auto data = dataset(ctx);
  const std::vector<std::string> obs = {"loss", "completion_mse", "energy_1", "energy_2"};
  const auto runs = run_variants(ctx, data, variants_of(ctx), obs);
  const auto& run = runs.front();
  const Vector& theta = run.trajectory.final_theta;
  const auto energies = stats::gauge_energy_modes(run.spec.block_matrix(theta, "U"), run.spec.block_matrix(theta, "V"));
  const auto balanced = reductions::balanced_matrix(data.array("M_star"), 2);
  const auto predicted = stats::gauge_energy_modes(balanced.u_star, balanced.v_star);

  ctx.metric("loss", run.final_values.at("loss"));
  ctx.metric("completion_mse", run.final_values.at("completion_mse"));
  for (Index i = 0; i < 2; ++i) {
    const std::string k = std::to_string(i + 1);
    ctx.metric("energy_" + k, energies.energies(i));
    ctx.target("energy_" + k, predicted.energies(i));
    ctx.metric("energy_rel_error_" + k, std::abs(energies.energies(i) - predicted.energies(i)) / std::abs(predicted.energies(i)));
    ctx.check("energy_" + k, "within", predicted.energies(i), 0.05 * std::abs(predicted.energies(i)),
              "oracle:balanced_matrix");
  }
  ctx.check("loss", "<", 1e-4, 0.0, "threshold");
  ctx.report.reference = {{"train_loss", 2.55e-5}};
  ctx.artifacts.series = variant_series(runs, obs);
}

void run_attention_ts(RunContext& ctx) {
  auto data = dataset(ctx);
  const std::vector<std::string> obs = {"loss", "mse", "test_mse", "qk_gap_ratio", "qk_max_gap"};
  const auto runs = run_variants(ctx, data, variants_of(ctx), obs);
  const auto& run = runs.front();
  const Vector& theta = run.trajectory.final_theta;
  const double initial = run.initial_values.at("qk_gap_ratio");
  const double final_ratio = run.final_values.at("qk_gap_ratio");

  // Balanced representative of the final predictor on the same orbit.
  const Matrix wq = run.spec.block_matrix(theta, "WQ");
  const Matrix wk = run.spec.block_matrix(theta, "WK");
  const auto tt = reductions::tt_balance(wq, wk.transpose());
  const Vector qn = (wq * tt.a).colwise().norm();
  const Vector kn = (wk * tt.a.inverse().transpose()).colwise().norm();
  ctx.target("qk_gap_ratio_balanced", (qn - kn).cwiseAbs().maxCoeff() / qn.mean());

  const NamedValues balance = stats::balance_metrics(run.spec, theta);
  ctx.metric("qk_gap_ratio_initial", initial);
  ctx.metric("qk_gap_ratio", final_ratio);
  ctx.metric("qk_gap_reduction", initial / final_ratio);
  ctx.metric("vo_max_gap", balance.at("vo_max_gap"));
  ctx.metric("loss", run.final_values.at("loss"));
  ctx.metric("test_mse", run.final_values.at("test_mse"));
  ctx.check("qk_gap_ratio", "<", 0.1, 0.0, "threshold");
  ctx.check("qk_gap_reduction", ">=", 5.0, 0.0, "baseline:initial iterate");
  ctx.check("loss", "<", 1e-5, 0.0, "threshold");
  ctx.report.reference = {{"final_loss", 1.687e-7}};
  ctx.artifacts.series = variant_series(runs, obs);
}

void run_relu_balance(RunContext& ctx) {
  auto data = dataset(ctx);
  const std::vector<std::string> obs = {"loss", "accuracy", "median_balance_ratio", "active_neurons"};
  const auto runs = run_variants(ctx, data, variants_of(ctx), obs);
  const auto& run = runs.front();
  const NamedValues balance = stats::balance_metrics(run.spec, run.trajectory.final_theta);
  const double target = reductions::homogeneity_balance_ratio(1.0);
  ctx.target("balance_ratio", target);
  ctx.metric("median_balance_ratio", balance.at("median_balance_ratio"));
  ctx.metric("median_balance_ratio_initial", run.initial_values.at("median_balance_ratio"));
  ctx.metric("excluded_neurons", balance.at("excluded_neurons"));
  ctx.metric("loss", run.final_values.at("loss"));
  ctx.metric("accuracy", run.final_values.at("accuracy"));
  ctx.check("median_balance_ratio", "within", target, 0.1, "oracle:homogeneity_balance_ratio(1)");
  ctx.check("loss", "<=", 2e-2, 0.0, "threshold");
  ctx.report.reference = {{"loss", 1.2e-2}, {"epochs", 700}};
  ctx.artifacts.series = variant_series(runs, obs);
}

void run_l1_hadamard(RunContext& ctx) {
  auto data = dataset(ctx);
  const std::vector<std::string> obs = {"loss", "train_mse", "test_mse", "l1"};
  const auto runs = run_variants(ctx, data, variants_of(ctx), obs);
  record_finals(ctx, runs, obs);
  const Vector w_true = column(data.array("w_true"));
  double truth = 0.0;
  for (Index i = 0; i < w_true.size(); ++i) truth += 0.5 * reductions::balanced_scalar(w_true(i)).cost;
  ctx.target("l1_truth", truth);
  auto& m = ctx.report.metrics;
  const double err_f = std::abs(m.at("l1_factorized") - truth);
  const double err_v = std::abs(m.at("l1_vanilla") - truth);
  ctx.metric("l1_error_factorized", err_f);
  ctx.metric("l1_error_vanilla", err_v);
  ctx.metric("l1_error_ratio", err_f / err_v);
  ctx.metric("l1_ratio", m.at("l1_factorized") / m.at("l1_vanilla"));
  ctx.metric("test_mse_ratio", m.at("test_mse_factorized") / m.at("test_mse_vanilla"));
  ctx.check("l1_error_ratio", "<", 1.0 / 1.5, 0.0, "baseline:vanilla");
  ctx.check("l1_ratio", "<", 0.65, 0.0, "baseline:vanilla");
  ctx.check("test_mse_ratio", "<", 1.0, 0.0, "baseline:vanilla");
  ctx.report.reference = {{"l1_factorized", 53.0}, {"l1_vanilla", 97.7}, {"l1_truth", 50.3}};
  ctx.artifacts.series = variant_series(runs, obs);
}

void run_group_lasso(RunContext& ctx) {
  auto data = dataset(ctx);
  const std::vector<std::string> obs = {"loss", "train_mse", "test_mse", "group_norm_sum", "active_fraction"};
  const auto runs = run_variants(ctx, data, variants_of(ctx), obs);
  record_finals(ctx, runs, obs);
  const Vector w_true = column(data.array("w_true"));
  const Vector ids = column(data.array("groups"));
  const Index g = ctx.rc.model_params.at("G").get<Index>();
  std::vector<std::vector<double>> members(static_cast<std::size_t>(g));
  for (Index i = 0; i < w_true.size(); ++i) members[static_cast<std::size_t>(ids(i))].push_back(w_true(i));
  double norm_sum = 0.0;
  Index active = 0;
  for (const auto& m : members) {
    const Vector wg = Eigen::Map<const Vector>(m.data(), static_cast<Index>(m.size()));
    norm_sum += 0.5 * reductions::block_balance(wg).value;
    active += wg.norm() > 0.2;
  }
  ctx.target("group_norm_sum_truth", norm_sum);
  ctx.target("active_fraction_truth", static_cast<double>(active) / static_cast<double>(g));
  ctx.check("active_fraction_factorized", "<=", 0.60, 0.0, "threshold");
  ctx.check("active_fraction_vanilla", ">=", 0.95, 0.0, "threshold");
  ctx.report.reference = {{"active_fraction_factorized", 0.55}, {"active_fraction_vanilla", 1.0}};
  ctx.artifacts.series = variant_series(runs, obs);
}

}  // namespace orbitlab::expcli::detail
