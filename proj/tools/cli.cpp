// Command-line front end: wires a JSON job config and seeds to the
// analysis pipelines and emits machine-readable CSV/JSON results.
//
// Exit codes: 0 success, 1 analysis failure, 2 usage/config error.

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "hesskit/landscape.hpp"
#include "hesskit/model.hpp"
#include "hesskit/oracle.hpp"
#include "hesskit/spectral.hpp"
#include "hesskit/textio.hpp"

using json = nlohmann::json;
using namespace hesskit;

namespace {

constexpr const char* kVersion = "0.1.0";

struct JobSpec {
  std::string config_path;
  std::string command;
  std::uint64_t seed = 42;
  int top_k = 2;
  int n_v = 64;
  int q = 64;
  std::string sigma = "auto";
  int grid_points = 1024;
  double eps = 0.5;  // range is (-eps, eps)
  int resolution = 41;
  std::vector<std::string> stages;
  int threads = 1;
  std::string out_prefix = "out";
  std::string params_file;
  std::string distribution = "rademacher";
  bool save_vectors = false;
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Everything the commands operate on, built from the config file.
struct Job {
  JobSpec spec;
  SymmetricOperator op;   // full-dimension operator
  BlockLayout layout;     // names for stage filtering
  bool has_model = false;
  ModelConfig model;
  Batch batch;
  ParamVector params;
};

Activation parse_activation(const std::string& s) {
  if (s == "tanh") return Activation::kTanh;
  if (s == "sigmoid") return Activation::kSigmoid;
  if (s == "softplus") return Activation::kSoftplus;
  throw UsageError("unknown activation '" + s + "'");
}

LossKind parse_loss(const std::string& s) {
  if (s == "mse") return LossKind::kMse;
  if (s == "cross_entropy") return LossKind::kCrossEntropy;
  throw UsageError("unknown loss '" + s + "'");
}

DatasetKind parse_dataset(const std::string& s) {
  if (s == "two_gaussians") return DatasetKind::kTwoGaussians;
  if (s == "ring") return DatasetKind::kRing;
  if (s == "linear_regression") return DatasetKind::kLinearRegression;
  throw UsageError("unknown dataset kind '" + s + "'");
}

ProbeDistribution parse_distribution(const std::string& s) {
  if (s == "rademacher") return ProbeDistribution::kRademacher;
  if (s == "gaussian") return ProbeDistribution::kGaussian;
  throw UsageError("unknown distribution '" + s + "'");
}

std::size_t oracle_cap() {
  if (const char* env = std::getenv("HESSKIT_ORACLE_CAP")) {
    const long v = std::atol(env);
    if (v > 0) return std::size_t(v);
  }
  return 2000;
}

Job load_job(JobSpec spec) {
  std::ifstream in(spec.config_path);
  if (!in) throw UsageError("cannot open config: " + spec.config_path);
  json cfg;
  try {
    in >> cfg;
  } catch (const json::exception& e) {
    throw UsageError("config parse error: " + std::string(e.what()));
  }

  Job job;
  job.spec = std::move(spec);

  const bool has_model = cfg.contains("model");
  const bool has_operator = cfg.contains("operator");
  if (has_model == has_operator) {
    throw UsageError("config must contain exactly one of model/operator");
  }

  try {
    if (has_model) {
      const json& m = cfg.at("model");
      job.has_model = true;
      job.model.input_dim = m.at("input_dim").get<int>();
      job.model.output_dim = m.at("output_dim").get<int>();
      job.model.hidden = m.value("hidden", std::vector<int>{});
      job.model.activation =
          parse_activation(m.value("activation", std::string("tanh")));
      job.model.loss = parse_loss(m.value("loss", std::string("mse")));
      job.model.residual = m.value("residual", std::vector<bool>{});
      job.model.norm = m.value("norm", std::vector<bool>{});
      validate_config(job.model);

      const json& d = cfg.at("dataset");
      job.batch = make_dataset(parse_dataset(d.at("kind").get<std::string>()),
                               d.at("n").get<int>(), d.value("noise", 0.0),
                               d.value("seed", std::uint64_t{0}));

      const std::string params_file =
          !job.spec.params_file.empty()
              ? job.spec.params_file
              : cfg.value("params_file", std::string());
      if (!params_file.empty()) {
        const std::vector<double> values = read_vector_file(params_file);
        if (values.size() != param_count(job.model)) {
          throw UsageError("params file length does not match the model");
        }
        job.params = ParamVector{values, make_layout(job.model)};
      } else {
        job.params =
            init_params(job.model, cfg.value("init_seed", std::uint64_t{1}));
      }
      job.op = hessian_operator(job.model, job.params, job.batch);
      job.layout = job.params.layout;
    } else {
      const json& o = cfg.at("operator");
      const std::string kind = o.at("kind").get<std::string>();
      DenseMatrix a;
      if (kind == "diagonal") {
        std::vector<double> d;
        if (o.contains("values")) {
          d = o.at("values").get<std::vector<double>>();
        } else {
          for (const json& blk : o.at("blocks")) {
            const double value = blk.at("value").get<double>();
            const int count = blk.at("count").get<int>();
            d.insert(d.end(), count, value);
          }
        }
        a = DenseMatrix::diagonal(d);
      } else if (kind == "dense") {
        const auto entries = o.at("entries").get<std::vector<double>>();
        const std::size_t dim = o.at("dim").get<std::size_t>();
        if (entries.size() != dim * dim) {
          throw UsageError("dense operator entries must be dim*dim");
        }
        a = DenseMatrix(dim);
        std::copy(entries.begin(), entries.end(), a.data().begin());
        if (!a.is_symmetric(1e-8 * std::max(1.0, a.max_abs()))) {
          throw UsageError("dense operator entries are not symmetric");
        }
      } else {
        throw UsageError("unknown operator kind '" + kind + "'");
      }

      if (o.contains("layout")) {
        std::vector<Segment> segs;
        std::size_t off = 0;
        for (const json& s : o.at("layout")) {
          const std::size_t len = s.at("length").get<std::size_t>();
          segs.push_back(Segment{s.at("name").get<std::string>(), off, len});
          off += len;
        }
        job.layout = BlockLayout(segs);
        if (job.layout.total() != a.dim()) {
          throw UsageError("operator layout does not cover the dimension");
        }
      } else {
        job.layout = BlockLayout::single("all", a.dim());
      }
      job.op = dense_operator(std::move(a), job.layout);
    }
  } catch (const json::exception& e) {
    throw UsageError("config field error: " + std::string(e.what()));
  }

  for (const std::string& name : job.spec.stages) {
    if (!job.layout.has(name)) {
      throw UsageError("unknown stage '" + name + "'");
    }
  }
  return job;
}

// The operator the analysis runs on: stage-filtered when requested.
SymmetricOperator analysis_operator(const Job& job) {
  if (job.spec.stages.empty()) return job.op;
  return restrict_to_block(job.op, job.layout, job.spec.stages);
}

json base_report(const Job& job, const std::string& command,
                 std::size_t dim) {
  json j;
  j["version"] = kVersion;
  j["command"] = command;
  j["seed"] = job.spec.seed;
  j["dim"] = dim;
  if (!job.spec.stages.empty()) j["stages"] = job.spec.stages;
  return j;
}

double resolve_sigma(const std::string& sigma) {
  if (sigma == "auto") return -1.0;
  double v = 0.0;
  try {
    v = std::stod(sigma);
  } catch (const std::exception&) {
    throw UsageError("sigma must be a positive number or 'auto'");
  }
  if (v <= 0.0) throw UsageError("sigma must be positive or 'auto'");
  return v;
}

int run_eig(const Job& job) {
  const SymmetricOperator op = analysis_operator(job);
  const EigenResult r =
      top_eigenpairs(op, job.spec.top_k, 1e-6, 1000, job.spec.seed);

  json j = base_report(job, "eig", op.dim());
  j["top_k"] = job.spec.top_k;
  j["tol"] = 1e-6;
  j["max_iter"] = 1000;
  j["eigenvalues"] = r.eigenvalues;
  j["residuals"] = r.residuals;
  j["iterations"] = r.iterations_used;
  j["converged"] = std::vector<bool>(r.converged.begin(), r.converged.end());
  write_text_file(job.spec.out_prefix + ".eig.json", {j.dump(2)});

  if (job.spec.save_vectors) {
    std::vector<std::string> lines;
    std::string header;
    for (std::size_t k = 0; k < r.eigenvectors.size(); ++k) {
      header += (k ? "," : "") + ("v" + std::to_string(k + 1));
    }
    lines.push_back(header);
    for (std::size_t i = 0; i < op.dim(); ++i) {
      std::string row;
      for (std::size_t k = 0; k < r.eigenvectors.size(); ++k) {
        row += (k ? "," : "") + format_double(r.eigenvectors[k][i]);
      }
      lines.push_back(row);
    }
    write_text_file(job.spec.out_prefix + ".eigvecs.csv", lines);
  }
  return 0;
}

int run_trace(const Job& job) {
  const SymmetricOperator op = analysis_operator(job);
  ProbeConfig probes;
  probes.seed = job.spec.seed;
  probes.count = job.spec.n_v;
  probes.distribution = parse_distribution(job.spec.distribution);
  const TraceEstimate est = hutchinson_trace(op, probes, job.spec.threads);

  std::vector<std::string> lines;
  lines.push_back("n,estimate,stderr");
  double acc = 0.0;
  double acc2 = 0.0;
  for (std::size_t i = 0; i < est.samples.size(); ++i) {
    acc += est.samples[i];
    acc2 += est.samples[i] * est.samples[i];
    const double n = double(i + 1);
    double se = 0.0;
    if (i > 0) {
      const double var = (acc2 - acc * acc / n) / (n - 1.0);
      se = std::sqrt(std::max(var, 0.0) / n);
    }
    lines.push_back(std::to_string(i + 1) + "," +
                    format_double(est.running_means[i]) + "," +
                    format_double(se));
  }
  write_text_file(job.spec.out_prefix + ".trace.csv", lines);

  json j = base_report(job, "trace", op.dim());
  j["n_v"] = job.spec.n_v;
  j["distribution"] = job.spec.distribution;
  j["mean"] = est.mean;
  j["std_error"] = est.std_error;
  write_text_file(job.spec.out_prefix + ".trace.json", {j.dump(2)});
  return 0;
}

int run_density(const Job& job) {
  const SymmetricOperator op = analysis_operator(job);
  ProbeConfig probes;
  probes.seed = job.spec.seed;
  probes.count = job.spec.n_v;
  probes.distribution = parse_distribution(job.spec.distribution);
  SlqOptions opts;
  opts.q = job.spec.q;
  opts.sigma = resolve_sigma(job.spec.sigma);
  opts.grid_points = job.spec.grid_points;
  opts.threads = job.spec.threads;
  const SpectralDensity density = slq_density(op, probes, opts);

  std::vector<std::string> lines;
  lines.push_back("t,phi");
  for (std::size_t i = 0; i < density.grid.size(); ++i) {
    lines.push_back(format_double(density.grid[i]) + "," +
                    format_double(density.values[i]));
  }
  write_text_file(job.spec.out_prefix + ".density.csv", lines);

  json j = base_report(job, "density", op.dim());
  j["n_v"] = job.spec.n_v;
  j["q"] = job.spec.q;
  j["sigma"] = density.sigma;
  j["grid_points"] = job.spec.grid_points;
  j["distribution"] = job.spec.distribution;
  json runs = json::array();
  for (const SlqRun& run : density.runs) {
    runs.push_back({{"ritz", run.ritz_values}, {"weights", run.weights}});
  }
  j["runs"] = std::move(runs);
  write_text_file(job.spec.out_prefix + ".density.json", {j.dump(2)});
  return 0;
}

int run_landscape(const Job& job) {
  if (!job.has_model) {
    throw UsageError("landscape requires a model config, not an operator");
  }
  const SymmetricOperator op = analysis_operator(job);
  const EigenResult top = top_eigenpairs(op, 2, 1e-8, 5000, job.spec.seed);

  // With a stage filter the directions live in the block; embed them into
  // the full parameter space for the perturbation.
  std::vector<double> v1(job.params.values.size(), 0.0);
  std::vector<double> v2(job.params.values.size(), 0.0);
  if (job.spec.stages.empty()) {
    v1 = top.eigenvectors[0];
    v2 = top.eigenvectors[1];
  } else {
    std::size_t pos = 0;
    for (const Segment& s : job.layout.segments()) {
      bool selected = false;
      for (const std::string& name : job.spec.stages) {
        selected = selected || name == s.name;
      }
      if (!selected) continue;
      for (std::size_t i = 0; i < s.length; ++i) {
        v1[s.offset + i] = top.eigenvectors[0][pos + i];
        v2[s.offset + i] = top.eigenvectors[1][pos + i];
      }
      pos += s.length;
    }
  }

  const LandscapeGrid grid =
      landscape(job.model, job.params, job.batch, v1, v2,
                {-job.spec.eps, job.spec.eps}, job.spec.resolution, 4096,
                job.spec.threads);

  std::vector<std::string> lines;
  lines.push_back("eps1,eps2,loss");
  for (std::size_t i = 0; i < grid.eps1_axis.size(); ++i) {
    for (std::size_t j = 0; j < grid.eps2_axis.size(); ++j) {
      lines.push_back(format_double(grid.eps1_axis[i]) + "," +
                      format_double(grid.eps2_axis[j]) + "," +
                      format_double(grid.at(int(i), int(j))));
    }
  }
  write_text_file(job.spec.out_prefix + ".landscape.csv", lines);

  json j = base_report(job, "landscape", op.dim());
  j["eps1_axis"] = grid.eps1_axis;
  j["eps2_axis"] = grid.eps2_axis;
  j["base_loss"] = grid.base_loss;
  j["lambda1"] = top.eigenvalues[0];
  j["lambda2"] = top.eigenvalues[1];
  j["k"] = grid.k_batch;
  write_text_file(job.spec.out_prefix + ".landscape.json", {j.dump(2)});
  return 0;
}

struct CheckReport {
  int failures = 0;
  void line(bool ok, const std::string& name, const std::string& detail) {
    std::cout << (ok ? "[ok]   " : "[FAIL] ") << name << ": " << detail
              << "\n";
    if (!ok) ++failures;
  }
};

int run_check(const Job& job) {
  const SymmetricOperator op = analysis_operator(job);
  const std::size_t m = op.dim();
  CheckReport report;

  {  // Operator symmetry over random pairs.
    RngStream stream(job.spec.seed, 1000);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      const auto v1 = sample_probe(m, ProbeDistribution::kGaussian, stream);
      const auto v2 = sample_probe(m, ProbeDistribution::kGaussian, stream);
      const auto hv2 = op.apply(v2);
      const auto hv1 = op.apply(v1);
      double a = 0.0;
      double b = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        a += v1[i] * hv2[i];
        b += v2[i] * hv1[i];
      }
      worst = std::max(
          worst,
          std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-12}));
    }
    report.line(worst <= 1e-8, "operator symmetry",
                "max relative asymmetry " + format_double(worst));
  }

  if (job.has_model && job.spec.stages.empty()) {
    const GradientFn grad_fn = [&](std::span<const double> theta) {
      const ParamVector pt{{theta.begin(), theta.end()}, job.params.layout};
      return gradient(job.model, pt, job.batch).values;
    };

    {  // Autodiff HVP against the central-difference oracle.
      RngStream stream(job.spec.seed, 2000);
      double worst = 0.0;
      for (int trial = 0; trial < 5; ++trial) {
        auto v = sample_probe(m, ProbeDistribution::kGaussian, stream);
        double n = 0.0;
        for (double x : v) n += x * x;
        n = std::sqrt(n);
        for (double& x : v) x /= n;
        const auto ad = hvp(job.model, job.params, job.batch,
                            ParamVector{v, job.params.layout});
        const auto fd = fd_hvp(grad_fn, job.params.values, v);
        double diff2 = 0.0;
        double ref2 = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          diff2 += (ad.values[i] - fd[i]) * (ad.values[i] - fd[i]);
          ref2 += ad.values[i] * ad.values[i];
        }
        worst = std::max(worst, std::sqrt(diff2 / std::max(ref2, 1e-300)));
      }
      report.line(worst <= 1e-4, "hvp vs finite differences",
                  "max relative L2 error " + format_double(worst));
    }

    {  // Gradient against coordinate central differences (spot check).
      const ParamVector g = gradient(job.model, job.params, job.batch);
      double scale = 1e-12;
      for (double x : g.values) scale = std::max(scale, std::fabs(x));
      double worst = 0.0;
      ParamVector work = job.params;
      const double eps = 1e-5;
      const std::size_t stride = std::max<std::size_t>(1, m / 40);
      for (std::size_t i = 0; i < m; i += stride) {
        work.values[i] = job.params.values[i] + eps;
        const double fp = forward_loss(job.model, work, job.batch);
        work.values[i] = job.params.values[i] - eps;
        const double fm = forward_loss(job.model, work, job.batch);
        work.values[i] = job.params.values[i];
        worst = std::max(worst,
                         std::fabs(g.values[i] - (fp - fm) / (2.0 * eps)));
      }
      report.line(worst <= 1e-6 * scale, "gradient vs finite differences",
                  "max coordinate error " + format_double(worst));
    }
  }

  if (m <= oracle_cap()) {
    const Materialized mat = materialize(op, oracle_cap(), job.spec.threads);
    report.line(mat.asymmetry <= 1e-8, "materialized asymmetry",
                format_double(mat.asymmetry));

    const FullSpectrum dense = dense_symmetric_eig(mat.matrix);
    std::vector<double> by_mag = dense.eigenvalues;
    std::sort(by_mag.begin(), by_mag.end(),
              [](double a, double b) { return std::fabs(a) > std::fabs(b); });

    const int k = std::min<int>(2, int(m));
    const EigenResult top = top_eigenpairs(op, k, 1e-8, 5000, job.spec.seed);
    double worst = 0.0;
    bool converged = true;
    for (int j = 0; j < k; ++j) {
      converged = converged && top.converged[j];
      worst = std::max(worst, std::fabs(std::fabs(top.eigenvalues[j]) -
                                        std::fabs(by_mag[j])) /
                                  std::max(std::fabs(by_mag[j]), 1e-12));
    }
    report.line(worst <= 1e-6, "top eigenvalues vs dense oracle",
                "max relative error " + format_double(worst) +
                    (converged ? "" : " (power iteration hit max_iter; the"
                                      " top magnitudes may be degenerate)"));

    double exact = 0.0;
    for (std::size_t i = 0; i < m; ++i) exact += mat.matrix.at(i, i);
    ProbeConfig probes;
    probes.seed = job.spec.seed;
    probes.count = 800;
    const TraceEstimate est = hutchinson_trace(op, probes, job.spec.threads);
    const bool ok =
        std::fabs(est.mean - exact) <=
        std::max(4.0 * est.std_error, 1e-10 * std::fabs(exact) + 1e-12);
    report.line(ok, "hutchinson trace vs dense oracle",
                "estimate " + format_double(est.mean) + " exact " +
                    format_double(exact) + " stderr " +
                    format_double(est.std_error));

    ProbeConfig slq_probes;
    slq_probes.seed = job.spec.seed + 1;
    slq_probes.count = std::min(job.spec.n_v, 16);
    SlqOptions opts;
    opts.q = std::min<int>(job.spec.q, int(m));
    opts.threads = job.spec.threads;
    const SpectralDensity density = slq_density(op, slq_probes, opts);
    double integral = 0.0;
    for (std::size_t i = 0; i + 1 < density.grid.size(); ++i) {
      integral += 0.5 * (density.values[i] + density.values[i + 1]) *
                  (density.grid[i + 1] - density.grid[i]);
    }
    report.line(std::fabs(integral - 1.0) <= 5e-3,
                "slq density normalization",
                "integral " + format_double(integral));
  } else {
    report.line(true, "dense oracle checks",
                "skipped (dim " + std::to_string(m) + " above cap " +
                    std::to_string(oracle_cap()) + ")");
  }

  std::cout << (report.failures == 0 ? "CHECK PASSED" : "CHECK FAILED")
            << " (" << report.failures << " failing)\n";
  return report.failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"matrix-free Hessian spectral analysis"};
  app.require_subcommand(1);

  JobSpec spec;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("-c,--config", spec.config_path, "job config (JSON)")
        ->required();
    cmd->add_option("--seed", spec.seed, "master seed");
    cmd->add_option("--threads", spec.threads, "worker threads")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--out", spec.out_prefix, "output path prefix");
    cmd->add_option("--stages", spec.stages,
                    "restrict analysis to these layout segments")
        ->delimiter(',');
    cmd->add_option("--params", spec.params_file,
                    "parameter vector file (overrides config)");
    return cmd;
  };

  CLI::App* eig = add_common(app.add_subcommand("eig", "top eigenpairs"));
  eig->add_option("--top-k", spec.top_k)->check(CLI::PositiveNumber);
  eig->add_flag("--save-vectors", spec.save_vectors,
                "also write eigenvectors as CSV");

  CLI::App* trace =
      add_common(app.add_subcommand("trace", "Hutchinson trace"));
  trace->add_option("--n-v", spec.n_v)->check(CLI::PositiveNumber);
  trace->add_option("--distribution", spec.distribution)
      ->check(CLI::IsMember({"rademacher", "gaussian"}));

  CLI::App* density =
      add_common(app.add_subcommand("density", "spectral density via SLQ"));
  density->add_option("--n-v", spec.n_v)->check(CLI::PositiveNumber);
  density->add_option("--q", spec.q)->check(CLI::PositiveNumber);
  density->add_option("--sigma", spec.sigma, "kernel width or 'auto'");
  density->add_option("--grid-points", spec.grid_points)
      ->check(CLI::Range(2, 1 << 22));
  density->add_option("--distribution", spec.distribution)
      ->check(CLI::IsMember({"rademacher", "gaussian"}));

  CLI::App* land = add_common(app.add_subcommand(
      "landscape", "loss over the top-two eigenvector plane"));
  land->add_option("--eps", spec.eps, "half range of the perturbation axes")
      ->check(CLI::PositiveNumber);
  land->add_option("--resolution", spec.resolution)
      ->check(CLI::Range(3, 9999));

  CLI::App* check = add_common(
      app.add_subcommand("check", "oracle suite on the configured job"));
  check->add_option("--n-v", spec.n_v)->check(CLI::PositiveNumber);
  check->add_option("--q", spec.q)->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    spec.command = app.get_subcommands().front()->get_name();
    Job job = load_job(spec);
    try {
      if (spec.command == "eig") return run_eig(job);
      if (spec.command == "trace") return run_trace(job);
      if (spec.command == "density") return run_density(job);
      if (spec.command == "landscape") return run_landscape(job);
      return run_check(job);
    } catch (const UsageError&) {
      throw;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 1;  // analysis failure
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;  // usage or config failure
  }
}
