#include "sparseprop/bench.hpp"

#include <chrono>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "sparseprop/arena.hpp"
#include "sparseprop/dataset.hpp"

namespace sparseprop {

void BenchConfig::validate() const {
  if (methods.empty() || n_hidden.empty() || timesteps.empty())
    throw std::invalid_argument("bench: methods, n_hidden and timesteps must be non-empty");
  if (repeats < 3) throw std::invalid_argument("bench: repeats must be >= 3");
  if (warmup < 1) throw std::invalid_argument("bench: warmup must be >= 1");
  for (auto n : n_hidden)
    if (n == 0) throw std::invalid_argument("bench: n_hidden must be >= 1");
  for (auto t : timesteps)
    if (t == 0) throw std::invalid_argument("bench: timesteps must be >= 1");
  if (n_inputs == 0 || n_classes == 0) throw std::invalid_argument("bench: n_inputs and n_classes must be >= 1");
  neuron.validate();
}

namespace {

using Clock = std::chrono::steady_clock;

template <typename T>
BenchRecord run_cell(const BenchConfig& cfg, Method method, std::size_t n, std::size_t steps, std::size_t repeats) {
  NetworkSpec spec;
  spec.neuron = cfg.neuron;
  spec.n_hidden = n;
  spec.n_inputs = cfg.n_inputs;
  spec.n_classes = cfg.n_classes;
  spec.seed = cfg.seed;
  const auto net = init_network<T>(spec);
  const auto ds = generate_poisson_dataset(1, cfg.n_inputs, steps, cfg.n_classes, cfg.seed);
  const auto sample = to_sample<T>(ds, 0);

  GradientOptions options;
  options.max_dense_elements = cfg.max_dense_elements;

  Sample<T> warm = sample;
  warm.steps = std::min(cfg.warmup, steps);
  warm.inputs.resize(warm.steps * warm.channels);
  (void)compute_gradient(method, net, warm, options);

  BenchRecord rec{method, n, steps, 0.0, 0.0, 0, cfg.seed};
  std::vector<double> per_step(repeats);
  for (std::size_t r = 0; r < repeats; ++r) {
    ArenaScope arena;
    const auto start = Clock::now();
    const auto g = compute_gradient(method, net, sample, options);
    const std::chrono::duration<double, std::milli> elapsed = Clock::now() - start;
    per_step[r] = elapsed.count() / static_cast<double>(steps);
    rec.peak_bytes = arena.stats().high_water_bytes;
    (void)g;
  }
  double sum = 0.0;
  for (double v : per_step) sum += v;
  rec.mean_step_ms = sum / static_cast<double>(repeats);
  if (repeats > 1) {
    double sq = 0.0;
    for (double v : per_step) sq += (v - rec.mean_step_ms) * (v - rec.mean_step_ms);
    rec.std_step_ms = std::sqrt(sq / static_cast<double>(repeats - 1));
  }
  return rec;
}

}  // namespace

BenchRecord bench_cell(const BenchConfig& cfg, Method method, std::size_t n_hidden, std::size_t timesteps,
                       std::size_t repeats) {
  if (repeats == 0) throw std::invalid_argument("bench: repeats must be >= 1");
  return cfg.precision == Precision::f32 ? run_cell<float>(cfg, method, n_hidden, timesteps, repeats)
                                         : run_cell<double>(cfg, method, n_hidden, timesteps, repeats);
}

std::vector<BenchRecord> bench_time(const BenchConfig& cfg) {
  cfg.validate();
  std::vector<BenchRecord> out;
  for (auto method : cfg.methods)
    for (auto n : cfg.n_hidden)
      for (auto steps : cfg.timesteps) out.push_back(bench_cell(cfg, method, n, steps, cfg.repeats));
  return out;
}

std::vector<BenchRecord> bench_memory(const BenchConfig& cfg) {
  cfg.validate();
  std::vector<BenchRecord> out;
  for (auto method : cfg.methods)
    for (auto n : cfg.n_hidden)
      for (auto steps : cfg.timesteps) out.push_back(bench_cell(cfg, method, n, steps, 1));
  return out;
}

void write_bench_csv(std::span<const BenchRecord> records, std::ostream& out) {
  out << "method,n_hidden,timesteps,mean_step_ms,std_step_ms,peak_bytes,seed\n";
  const auto flags = out.flags();
  const auto precision = out.precision();
  out.precision(6);
  for (const auto& r : records)
    out << method_name(r.method) << ',' << r.n_hidden << ',' << r.timesteps << ',' << r.mean_step_ms << ','
        << r.std_step_ms << ',' << r.peak_bytes << ',' << r.seed << '\n';
  out.flags(flags);
  out.precision(precision);
}

}  // namespace sparseprop
