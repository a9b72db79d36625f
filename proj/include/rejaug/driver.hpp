#pragma once

#include <rejaug/csv.hpp>
#include <rejaug/diagnostics.hpp>
#include <rejaug/gpds.hpp>
#include <rejaug/langevin.hpp>
#include <rejaug/manifest.hpp>
#include <rejaug/mixture.hpp>
#include <rejaug/stiefel.hpp>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <thread>

// Orchestration layer shared by the command-line tool and the experiment
// harnesses: manifest-driven prior simulation, posterior fitting with
// chain-level parallelism, diagnostics, and the canned comparison studies.

namespace rejaug {

namespace synth {

inline std::vector<Matrix> langevin_frames(const LangevinParams& params, int n, RngStream& rng) {
  std::vector<Matrix> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out.push_back(sample_matrix_langevin(params, rng));
  return out;
}

struct MixtureSpec {
  Eigen::VectorXd weights;
  std::vector<GaussianComponent> components;
};

inline std::vector<Eigen::VectorXd> truncated_mixture_points(const MixtureSpec& spec,
                                                             const TruncationRegion& region,
                                                             int n, RngStream& rng) {
  std::vector<Eigen::VectorXd> out;
  std::vector<detail::CholeskyGaussian> gs;
  for (const auto& c : spec.components) gs.push_back(detail::make_chol_gaussian(c, nullptr));
  while (static_cast<int>(out.size()) < n) {
    double u = rng.uniform();
    std::size_t k = gs.size() - 1;
    for (std::size_t j = 0; j < gs.size(); ++j) {
      if (u < spec.weights[static_cast<Eigen::Index>(j)]) {
        k = j;
        break;
      }
      u -= spec.weights[static_cast<Eigen::Index>(j)];
    }
    Eigen::VectorXd z(gs[k].mean.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
    const Eigen::VectorXd x = gs[k].mean + gs[k].chol.triangularView<Eigen::Lower>() * z;
    if (region.contains(x)) out.push_back(x);
  }
  return out;
}

// Two well separated bumps on roughly [0, 5].
inline std::vector<double> bimodal_sample(int n, RngStream& rng) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    if (rng.uniform() < 0.5)
      out.push_back(1.2 + 0.35 * rng.normal());
    else
      out.push_back(3.4 + 0.5 * rng.normal());
  }
  return out;
}

inline double bimodal_density(double x) {
  const auto g = [](double z, double m, double s) {
    return std::exp(-0.5 * (z - m) * (z - m) / (s * s)) / (s * std::sqrt(2.0 * std::numbers::pi));
  };
  return 0.5 * g(x, 1.2, 0.35) + 0.5 * g(x, 3.4, 0.5);
}

}  // namespace synth

namespace detail {

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory: " + dir + " (" + ec.message() + ")");
}

inline Eigen::VectorXd json_vector(const nlohmann::json& j) {
  if (!j.is_array()) throw ConfigError("expected an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

inline void run_chains(int chains, int threads, const std::function<void(int)>& body) {
  if (threads <= 1) {
    for (int c = 0; c < chains; ++c) body(c);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<int> next{0};
  for (int t = 0; t < std::min(threads, chains); ++t)
    pool.emplace_back([&]() {
      for (int c = next.fetch_add(1); c < chains; c = next.fetch_add(1)) body(c);
    });
  for (auto& th : pool) th.join();
}

inline std::vector<Matrix> read_frame_observations(const std::string& path, int d, int p) {
  const Eigen::MatrixXd raw = read_csv(path);
  if (raw.cols() != d * p)
    throw IoError(path + ": expected " + std::to_string(d * p) + " columns (column-major " +
                  std::to_string(d) + "x" + std::to_string(p) + "), got " +
                  std::to_string(raw.cols()));
  std::vector<Matrix> obs;
  for (Eigen::Index i = 0; i < raw.rows(); ++i) {
    const Vector row = raw.row(i);
    Matrix x = Eigen::Map<const Matrix>(row.data(), d, p);
    const double err = orthonormality_error(x);
    if (err > 1e-6)
      throw IoError(path + ": row " + std::to_string(i + 2) +
                    ": frame is not orthonormal (error " + format_double(err) + ")");
    obs.push_back(StiefelMatrix(x).matrix());
  }
  return obs;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// fit

inline LangevinFitConfig langevin_config_from(const RunManifest& m) {
  LangevinFitConfig c;
  const std::string method = m.get_or<std::string>("sampler.method", "hmc");
  if (method == "hmc")
    c.sampler = KappaSampler::Hmc;
  else if (method == "rw")
    c.sampler = KappaSampler::Rw;
  else if (method == "exchange")
    c.sampler = KappaSampler::Exchange;
  else if (method == "approx")
    c.sampler = KappaSampler::Approx;
  else
    throw ConfigError("unknown sampler.method: " + method);
  c.iterations = m.get_or<int>("sampler.iterations", 10000);
  c.burn_in = m.get_or<int>("sampler.burn_in", 1000);
  c.step_size = m.get_or<double>("sampler.step_size", 0.3);
  c.leapfrog_steps = m.get_or<int>("sampler.leapfrog_steps", 5);
  c.proposal_sd = m.get_or<double>("sampler.proposal_sd", 1.0);
  c.sample_h = m.get_or<bool>("sampler.sample_h", false);
  c.prior_shape = m.get_or<double>("prior.gamma_shape", 1.0);
  c.prior_rate = m.get_or<double>("prior.gamma_rate", 0.1);
  return c;
}

inline GpdsConfig gpds_config_from(const RunManifest& m) {
  GpdsConfig c;
  c.iterations = m.get_or<int>("sampler.iterations", 2000);
  c.burn_in = m.get_or<int>("sampler.burn_in", 500);
  c.kernel.variance = m.get_or<double>("kernel.variance", 1.0);
  c.kernel.length_scale = m.get_or<double>("kernel.length_scale", 1.0);
  c.nig_m = m.get_or<double>("prior.nig_m", 0.0);
  c.nig_lambda = m.get_or<double>("prior.nig_lambda", 0.1);
  c.nig_a = m.get_or<double>("prior.nig_a", 1.0);
  c.nig_b = m.get_or<double>("prior.nig_b", 10.0);
  c.f_sweeps = m.get_or<int>("sampler.f_sweeps", 3);
  c.use_hmc_f = m.get_or<bool>("sampler.use_hmc_f", false);
  c.update_gp_hypers = m.get_or<bool>("sampler.update_gp_hypers", false);
  c.grid_size = m.get_or<int>("output.grid_size", 1024);
  c.snapshot_every = m.get_or<int>("output.snapshot_every", 10);
  return c;
}

inline MixtureFitConfig mixture_config_from(const RunManifest& m, int dim) {
  MixtureFitConfig c;
  c.iterations = m.get_or<int>("sampler.iterations", 1000);
  c.burn_in = m.get_or<int>("sampler.burn_in", 200);
  c.truncation = m.get_or<int>("model_params.truncation", 50);
  c.alpha = m.get_or<double>("model_params.alpha", 1.0);
  c.grid_size = m.get_or<int>("output.grid_size", 100);
  if (m.has("base.mu0")) {
    c.base.mu0 = detail::json_vector(m.get<nlohmann::json>("base.mu0"));
    c.base.lambda0 = m.get_or<double>("base.lambda0", 0.01);
    c.base.psi = m.get_or<double>("base.psi_scale", 0.1) * Eigen::MatrixXd::Identity(dim, dim);
    c.base.nu = m.get_or<double>("base.nu", dim + 2.0);
  }
  return c;
}

inline int cmd_fit(const RunManifest& manifest, const std::string& out_dir, int threads) {
  detail::ensure_dir(out_dir);
  const std::string model = manifest.get<std::string>("model");
  const auto seed = manifest.get_or<std::uint64_t>("seed", 0);
  const int chains = manifest.get_or<int>("sampler.chains", 1);
  const std::string data_path = manifest.get<std::string>("data");

  manifest.save(out_dir + "/manifest.json");

  if (model == "langevin") {
    const int d = manifest.get<int>("model_params.d");
    const int p = manifest.get<int>("model_params.p");
    const auto obs = detail::read_frame_observations(data_path, d, p);
    const LangevinFitConfig config = langevin_config_from(manifest);
    detail::run_chains(chains, threads, [&](int c) {
      RngStream chain_rng = RngStream(seed).substream(static_cast<std::uint64_t>(c) + 1);
      const ChainTrace trace = fit_langevin(obs, d, p, config, chain_rng);
      write_trace_csv(out_dir + "/trace_chain" + std::to_string(c) + ".csv", trace);
      write_timing_csv(out_dir + "/timing_chain" + std::to_string(c) + ".csv", trace);
    });
    return 0;
  }

  if (model == "trunc-mixture") {
    Eigen::MatrixXd raw = read_csv(data_path);
    const int d = static_cast<int>(raw.cols());
    TruncationRegion region{Eigen::VectorXd::Zero(d), Eigen::VectorXd::Ones(d)};
    RunManifest echo = manifest;
    if (manifest.has("normalize.raw_lower")) {
      const Eigen::VectorXd lo = detail::json_vector(manifest.get<nlohmann::json>("normalize.raw_lower"));
      const Eigen::VectorXd hi = detail::json_vector(manifest.get<nlohmann::json>("normalize.raw_upper"));
      for (Eigen::Index i = 0; i < raw.rows(); ++i)
        raw.row(i) = (raw.row(i).transpose() - lo).cwiseQuotient(hi - lo).transpose();
      echo.doc()["normalization_applied"] = {{"raw_lower", manifest.get<nlohmann::json>("normalize.raw_lower")},
                                             {"raw_upper", manifest.get<nlohmann::json>("normalize.raw_upper")},
                                             {"target", "unit hypercube"}};
      echo.save(out_dir + "/manifest.json");
    } else if (manifest.has("region.lower")) {
      region.lower = detail::json_vector(manifest.get<nlohmann::json>("region.lower"));
      region.upper = detail::json_vector(manifest.get<nlohmann::json>("region.upper"));
    }
    std::vector<Eigen::VectorXd> obs;
    for (Eigen::Index i = 0; i < raw.rows(); ++i) obs.push_back(raw.row(i).transpose());
    const MixtureFitConfig config = mixture_config_from(manifest, d);
    detail::run_chains(chains, threads, [&](int c) {
      RngStream chain_rng = RngStream(seed).substream(static_cast<std::uint64_t>(c) + 1);
      const MixtureFitResult result = fit_truncated_dpmm(obs, region, config, chain_rng);
      const std::string suffix = "_chain" + std::to_string(c) + ".csv";
      write_trace_csv(out_dir + "/trace" + suffix, result.trace);
      write_timing_csv(out_dir + "/timing" + suffix, result.trace);
      if (result.grid_points.rows() > 0) {
        Eigen::MatrixXd grid(result.grid_points.rows(), d + 3);
        grid.leftCols(d) = result.grid_points;
        grid.col(d) = result.mean_density;
        grid.col(d + 1) = result.mean_log_density;
        grid.col(d + 2) = result.mean_density.array().log();
        std::vector<std::string> header;
        for (int k = 0; k < d; ++k) header.push_back("x" + std::to_string(k + 1));
        header.insert(header.end(), {"mean_density", "mean_log_density", "log_mean_density"});
        write_csv(out_dir + "/density_grid" + suffix, header, grid);
      }
    });
    return 0;
  }

  if (model == "gpds") {
    const Eigen::MatrixXd raw = read_csv(data_path);
    std::vector<double> obs;
    if (raw.cols() == 1) {
      for (Eigen::Index i = 0; i < raw.rows(); ++i) obs.push_back(raw(i, 0));
    } else if (raw.cols() == 2 && manifest.has("group")) {
      const double group = manifest.get<double>("group");
      for (Eigen::Index i = 0; i < raw.rows(); ++i)
        if (raw(i, 1) == group) obs.push_back(raw(i, 0));
    } else {
      throw IoError(data_path + ": expected one value column (plus optional group column)");
    }
    const GpdsConfig config = gpds_config_from(manifest);
    detail::run_chains(chains, threads, [&](int c) {
      RngStream chain_rng = RngStream(seed).substream(static_cast<std::uint64_t>(c) + 1);
      const GpdsFitResult result = fit_gpds(obs, config, chain_rng);
      const std::string suffix = "_chain" + std::to_string(c) + ".csv";
      write_trace_csv(out_dir + "/trace" + suffix, result.trace);
      write_timing_csv(out_dir + "/timing" + suffix, result.trace);
      if (result.mean_density.size() > 0) {
        Eigen::MatrixXd grid(result.grid.size(), 5);
        grid.col(0) = result.grid;
        grid.col(1) = result.density_q10;
        grid.col(2) = result.density_q50;
        grid.col(3) = result.density_q90;
        grid.col(4) = result.mean_density;
        write_csv(out_dir + "/density_grid" + suffix, {"x", "q10", "q50", "q90", "mean"}, grid);
      }
      // Histogram of rejected-proposal counts over post-burn iterations.
      std::vector<int> counts(result.trace.aug_sizes.begin() + config.burn_in,
                              result.trace.aug_sizes.end());
      if (!counts.empty()) {
        const int lo = *std::min_element(counts.begin(), counts.end());
        const int hi = *std::max_element(counts.begin(), counts.end());
        const int bins = 20;
        const double width = std::max(1.0, (hi - lo + 1.0) / bins);
        Eigen::MatrixXd hist = Eigen::MatrixXd::Zero(bins, 3);
        for (int b = 0; b < bins; ++b) {
          hist(b, 0) = lo + b * width;
          hist(b, 1) = lo + (b + 1) * width;
        }
        for (int v : counts) {
          const int b = std::min(bins - 1, static_cast<int>((v - lo) / width));
          hist(b, 2) += 1.0;
        }
        write_csv(out_dir + "/reject_hist" + suffix, {"count_lo", "count_hi", "frequency"}, hist);
      }
    });
    return 0;
  }

  throw ConfigError("unknown model for fit: " + model);
}

// ---------------------------------------------------------------------------
// sample-prior

inline int cmd_sample_prior(const RunManifest& manifest, const std::string& out_dir) {
  detail::ensure_dir(out_dir);
  const std::string model = manifest.get<std::string>("model");
  const auto seed = manifest.get_or<std::uint64_t>("seed", 0);
  const int n_draws = manifest.get_or<int>("n_draws", 1000);
  RngStream rng(seed);
  manifest.save(out_dir + "/manifest.json");

  nlohmann::json summary;
  summary["n_draws"] = n_draws;

  if (model == "langevin") {
    const int d = manifest.get<int>("model_params.d");
    const int p = manifest.get<int>("model_params.p");
    const Eigen::VectorXd kappa = detail::json_vector(manifest.get<nlohmann::json>("model_params.kappa"));
    StiefelMatrix g = manifest.has("model_params.g")
                          ? StiefelMatrix(Eigen::Map<const Matrix>(
                                detail::json_vector(manifest.get<nlohmann::json>("model_params.g")).data(), d, p))
                          : StiefelMatrix(sample_haar_uniform(d, p, rng));
    LangevinParams params(g, kappa);
    Eigen::MatrixXd samples(n_draws, d * p);
    std::uint64_t proposals = 0;
    for (int i = 0; i < n_draws; ++i) {
      std::uint64_t used = 0;
      const Matrix x = sample_matrix_langevin(params, rng, kDefaultMaxAttempts, &used);
      proposals += used;
      samples.row(i) = Eigen::Map<const Vector>(x.data(), d * p).transpose();
    }
    std::vector<std::string> header;
    for (int j = 0; j < d * p; ++j) header.push_back("x" + std::to_string(j + 1));
    write_csv(out_dir + "/samples.csv", header, samples);
    summary["proposals"] = proposals;
    summary["acceptance_rate"] = static_cast<double>(n_draws) / static_cast<double>(proposals);
  } else if (model == "trunc-mixture") {
    const int d = manifest.get_or<int>("model_params.d", 2);
    TruncationRegion region{Eigen::VectorXd::Zero(d), Eigen::VectorXd::Ones(d)};
    if (manifest.has("region.lower")) {
      region.lower = detail::json_vector(manifest.get<nlohmann::json>("region.lower"));
      region.upper = detail::json_vector(manifest.get<nlohmann::json>("region.upper"));
    }
    const NormalInverseWishart base = default_niw_base(region, d);
    const auto state = sample_stick_breaking_prior(manifest.get_or<int>("model_params.truncation", 50),
                                                   manifest.get_or<double>("model_params.alpha", 1.0),
                                                   base, rng);
    const auto model_obj = truncated_mixture_model(state, region);
    Eigen::MatrixXd samples(n_draws, d);
    std::uint64_t proposals = 0;
    for (int i = 0; i < n_draws; ++i) {
      const auto draw = sample_with_rejections(model_obj, rng);
      proposals += draw.rejected.size() + 1;
      samples.row(i) = draw.accepted.transpose();
    }
    std::vector<std::string> header;
    for (int j = 0; j < d; ++j) header.push_back("x" + std::to_string(j + 1));
    write_csv(out_dir + "/samples.csv", header, samples);
    summary["proposals"] = proposals;
    summary["acceptance_rate"] = static_cast<double>(n_draws) / static_cast<double>(proposals);
  } else if (model == "gpds") {
    GpdsConfig config = gpds_config_from(manifest);
    const double mu = manifest.get_or<double>("model_params.g0_mean", 0.0);
    const double sd = manifest.get_or<double>("model_params.g0_sd", 1.0);
    GpSurface surface(config.kernel, manifest.get_or<double>("model_params.f_mean", 0.0));
    const auto gen = gpds_generate(surface, mu, sd, n_draws, rng);
    Eigen::MatrixXd samples(n_draws, 1);
    for (int i = 0; i < n_draws; ++i) samples(i, 0) = gen.accepted[static_cast<std::size_t>(i)];
    write_csv(out_dir + "/samples.csv", {"x"}, samples);
    summary["proposals"] = gen.proposals;
    summary["acceptance_rate"] = static_cast<double>(n_draws) / static_cast<double>(gen.proposals);
  } else if (model == "toy-discrete") {
    std::vector<double> f, q;
    for (const auto& v : manifest.get<nlohmann::json>("model_params.f")) f.push_back(v.get<double>());
    for (const auto& v : manifest.get<nlohmann::json>("model_params.q")) q.push_back(v.get<double>());
    struct Toy {
      using Point = int;
      std::vector<double> f, q;
      double m;
      double log_f(int x) const { return std::log(f[static_cast<std::size_t>(x)]); }
      double log_q(int x) const { return std::log(q[static_cast<std::size_t>(x)]); }
      double log_envelope() const { return std::log(m); }
      int propose(RngStream& r) const {
        double u = r.uniform();
        for (std::size_t i = 0; i + 1 < q.size(); ++i) {
          if (u < q[i]) return static_cast<int>(i);
          u -= q[i];
        }
        return static_cast<int>(q.size()) - 1;
      }
    } toy{f, q, manifest.get<double>("model_params.m")};
    Eigen::MatrixXd samples(n_draws, 2);
    std::uint64_t proposals = 0;
    for (int i = 0; i < n_draws; ++i) {
      const auto draw = sample_with_rejections(toy, rng);
      proposals += draw.rejected.size() + 1;
      samples(i, 0) = draw.accepted;
      samples(i, 1) = static_cast<double>(draw.rejected.size());
    }
    write_csv(out_dir + "/samples.csv", {"x", "rejected"}, samples);
    summary["proposals"] = proposals;
    summary["acceptance_rate"] = static_cast<double>(n_draws) / static_cast<double>(proposals);
  } else {
    throw ConfigError("unknown model for sample-prior: " + model);
  }

  std::ofstream os(out_dir + "/summary.json");
  os << summary.dump(2) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// diagnose

inline int cmd_diagnose(const std::vector<std::string>& trace_paths, const std::string& out_dir) {
  if (trace_paths.size() < 2) throw ConfigError("diagnose: need at least two trace files");
  detail::ensure_dir(out_dir);
  std::vector<ChainTrace> traces;
  std::vector<LabeledTrace> labeled;
  for (const auto& path : trace_paths) {
    std::string timing = path;
    const auto pos = timing.rfind("trace");
    if (pos != std::string::npos) timing.replace(pos, 5, "timing");
    if (!std::filesystem::exists(timing)) timing.clear();
    traces.push_back(read_trace_csv(path, timing));
    if (timing.empty()) {
      auto& t = traces.back();
      std::fill(t.seconds.begin(), t.seconds.end(), 1.0 / static_cast<double>(t.seconds.size()));
    }
  }
  for (std::size_t i = 0; i < traces.size(); ++i)
    labeled.push_back({std::filesystem::path(trace_paths[i]).stem().string(), &traces[i]});
  const auto cmp = compare_samplers(labeled);
  std::ofstream csv(out_dir + "/comparison.csv");
  cmp.to_csv(csv);
  std::ofstream md(out_dir + "/comparison.md");
  cmp.to_markdown(md);
  return 0;
}

// ---------------------------------------------------------------------------
// ingest-check

inline int cmd_ingest_check(const RunManifest& manifest, std::ostream& os) {
  const std::string model = manifest.get<std::string>("model");
  const std::string data_path = manifest.get<std::string>("data");
  if (model == "langevin") {
    const int d = manifest.get<int>("model_params.d");
    const int p = manifest.get<int>("model_params.p");
    const auto obs = detail::read_frame_observations(data_path, d, p);
    double worst = 0.0;
    for (const auto& x : obs) worst = std::max(worst, orthonormality_error(x));
    os << "rows: " << obs.size() << "\nframe: " << d << "x" << p
       << "\nmax_orthonormality_error: " << format_double(worst) << "\n";
    return 0;
  }
  const Eigen::MatrixXd raw = read_csv(data_path);
  if (!raw.allFinite()) throw IoError(data_path + ": non-finite values present");
  os << "rows: " << raw.rows() << "\ncolumns: " << raw.cols() << "\n";
  if (model == "trunc-mixture" && manifest.has("region.lower")) {
    const Eigen::VectorXd lo = detail::json_vector(manifest.get<nlohmann::json>("region.lower"));
    const Eigen::VectorXd hi = detail::json_vector(manifest.get<nlohmann::json>("region.upper"));
    Eigen::Index inside = 0;
    for (Eigen::Index i = 0; i < raw.rows(); ++i) {
      const Eigen::VectorXd x = raw.row(i).transpose();
      inside += ((x.array() >= lo.array()).all() && (x.array() <= hi.array()).all()) ? 1 : 0;
    }
    os << "inside_region: " << inside << "/" << raw.rows() << "\n";
    if (inside != raw.rows()) return 2;
  }
  return 0;
}

}  // namespace rejaug
