// End-to-end demonstration: trains two small classifiers that differ only
// in whether hidden layers are batch-normalized, then measures and emits
// the Hessian trace, the SLQ spectral density, the top-eigenvector loss
// landscape, and per-layer (stage-wise) traces for both. Numbers are
// reported, not judged; the point is the workflow.

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "hesskit/landscape.hpp"
#include "hesskit/model.hpp"
#include "hesskit/spectral.hpp"
#include "hesskit/textio.hpp"

using json = nlohmann::json;
using namespace hesskit;

namespace {

struct DemoOptions {
  std::string out_dir = "demo_out";
  int steps = 2000;
  int n = 256;
  int n_v = 64;
  int q = 32;
  std::uint64_t seed = 1;
  int threads = 1;
};

ModelConfig demo_config(bool with_norm) {
  ModelConfig c;
  c.input_dim = 2;
  c.output_dim = 2;
  c.hidden = {8, 8};
  c.activation = Activation::kTanh;
  c.loss = LossKind::kCrossEntropy;
  c.norm = {with_norm, with_norm};
  c.residual = {false, true};
  return c;
}

void emit_trace(const std::string& prefix, const TraceEstimate& est) {
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
  write_text_file(prefix + ".trace.csv", lines);
}

void emit_density(const std::string& prefix, const SpectralDensity& density) {
  std::vector<std::string> lines;
  lines.push_back("t,phi");
  for (std::size_t i = 0; i < density.grid.size(); ++i) {
    lines.push_back(format_double(density.grid[i]) + "," +
                    format_double(density.values[i]));
  }
  write_text_file(prefix + ".density.csv", lines);
}

void emit_landscape(const std::string& prefix, const LandscapeGrid& grid,
                    double lambda1, double lambda2) {
  std::vector<std::string> lines;
  lines.push_back("eps1,eps2,loss");
  for (std::size_t i = 0; i < grid.eps1_axis.size(); ++i) {
    for (std::size_t j = 0; j < grid.eps2_axis.size(); ++j) {
      lines.push_back(format_double(grid.eps1_axis[i]) + "," +
                      format_double(grid.eps2_axis[j]) + "," +
                      format_double(grid.at(int(i), int(j))));
    }
  }
  write_text_file(prefix + ".landscape.csv", lines);

  json j;
  j["base_loss"] = grid.base_loss;
  j["lambda1"] = lambda1;
  j["lambda2"] = lambda2;
  j["eps1_axis"] = grid.eps1_axis;
  j["eps2_axis"] = grid.eps2_axis;
  j["k"] = grid.k_batch;
  write_text_file(prefix + ".landscape.json", {j.dump(2)});
}

json analyze_variant(const DemoOptions& opt, const std::string& name,
                     bool with_norm, const Batch& data) {
  const ModelConfig config = demo_config(with_norm);
  double final_loss = 0.0;
  const ParamVector theta =
      train_gradient_descent(config, init_params(config, opt.seed), data,
                             opt.steps, 0.2, 0.9, &final_loss);
  std::cout << name << ": trained " << opt.steps
            << " steps, final loss " << final_loss << "\n";

  const std::string prefix = opt.out_dir + "/" + name;
  write_vector_file(prefix + ".params.csv", theta.values);

  const SymmetricOperator hess = hessian_operator(config, theta, data);

  ProbeConfig probes;
  probes.seed = opt.seed + 100;
  probes.count = opt.n_v;
  const TraceEstimate trace = hutchinson_trace(hess, probes, opt.threads);
  emit_trace(prefix, trace);
  std::cout << "  trace " << trace.mean << " +- " << trace.std_error << "\n";

  SlqOptions slq;
  slq.q = opt.q;
  slq.threads = opt.threads;
  ProbeConfig density_probes;
  density_probes.seed = opt.seed + 200;
  density_probes.count = std::max(8, opt.n_v / 2);
  const SpectralDensity density = slq_density(hess, density_probes, slq);
  emit_density(prefix, density);
  double support_lo = density.grid.front();
  double support_hi = density.grid.back();
  std::cout << "  esd support [" << support_lo << ", " << support_hi
            << "], sigma " << density.sigma << "\n";

  const EigenResult top = top_eigenpairs(hess, 2, 1e-8, 5000, opt.seed + 300);
  const LandscapeGrid grid =
      landscape(config, theta, data, top.eigenvectors[0], top.eigenvectors[1],
                {-0.5, 0.5}, 31, 4096, opt.threads);
  emit_landscape(prefix, grid, top.eigenvalues[0], top.eigenvalues[1]);
  std::cout << "  lambda1 " << top.eigenvalues[0] << ", lambda2 "
            << top.eigenvalues[1] << "\n";

  // Stage-wise traces, one block per layer (weights plus bias, plus the
  // norm parameters when present).
  json stages = json::object();
  std::vector<std::vector<std::string>> stage_sets;
  for (std::size_t layer = 0; layer <= config.hidden.size(); ++layer) {
    const std::string base = layer == config.hidden.size()
                                 ? "output"
                                 : "layer" + std::to_string(layer);
    std::vector<std::string> names;
    for (const Segment& s : theta.layout.segments()) {
      if (s.name.rfind(base + ".", 0) == 0) names.push_back(s.name);
    }
    stage_sets.push_back(names);
  }
  ProbeConfig stage_probes;
  stage_probes.seed = opt.seed + 400;
  stage_probes.count = opt.n_v;
  for (std::size_t i = 0; i < stage_sets.size(); ++i) {
    const std::string base =
        i == config.hidden.size() ? "output" : "layer" + std::to_string(i);
    const SymmetricOperator block =
        restrict_to_block(hess, theta.layout, stage_sets[i]);
    const TraceEstimate bt = hutchinson_trace(block, stage_probes, opt.threads);
    stages[base] = {{"trace", bt.mean}, {"stderr", bt.std_error}};
    std::cout << "  stage " << base << " trace " << bt.mean << "\n";
  }

  json summary;
  summary["name"] = name;
  summary["norm"] = with_norm;
  summary["final_loss"] = final_loss;
  summary["trace"] = trace.mean;
  summary["trace_stderr"] = trace.std_error;
  summary["lambda1"] = top.eigenvalues[0];
  summary["lambda2"] = top.eigenvalues[1];
  summary["esd_support"] = {support_lo, support_hi};
  summary["sigma"] = density.sigma;
  summary["stage_traces"] = stages;
  summary["dim"] = theta.values.size();
  summary["steps"] = opt.steps;
  return summary;
}

}  // namespace

int main(int argc, char** argv) {
  DemoOptions opt;
  CLI::App app{"train and analyze two toy classifiers (norm on vs off)"};
  app.add_option("--out", opt.out_dir, "output directory");
  app.add_option("--steps", opt.steps, "gradient-descent steps")
      ->check(CLI::PositiveNumber);
  app.add_option("--n", opt.n, "dataset size")->check(CLI::PositiveNumber);
  app.add_option("--n-v", opt.n_v, "probes per estimator")
      ->check(CLI::PositiveNumber);
  app.add_option("--q", opt.q, "Lanczos steps")->check(CLI::PositiveNumber);
  app.add_option("--seed", opt.seed, "master seed");
  app.add_option("--threads", opt.threads, "worker threads")
      ->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  try {
    std::filesystem::create_directories(opt.out_dir);
    const Batch data =
        make_dataset(DatasetKind::kTwoGaussians, opt.n, 1.5, opt.seed);

    json summary = json::array();
    summary.push_back(analyze_variant(opt, "with_norm", true, data));
    summary.push_back(analyze_variant(opt, "without_norm", false, data));
    write_text_file(opt.out_dir + "/summary.json", {summary.dump(2)});
    std::cout << "wrote " << opt.out_dir << "/summary.json\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
