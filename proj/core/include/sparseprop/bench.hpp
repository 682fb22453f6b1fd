#pragma once

// Scaling measurements: wall time per step and arena peak bytes of one
// full-sequence gradient computation per (method, n_hidden, timesteps).

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "sparseprop/gradients.hpp"

namespace sparseprop {

struct BenchConfig {
  std::vector<Method> methods{Method::eprop_sparse};
  std::vector<std::size_t> n_hidden{16, 32, 64, 128, 256};
  std::vector<std::size_t> timesteps{10, 100, 500, 1000, 2000};
  std::size_t repeats = 3;  // >= 3
  std::size_t warmup = 10;  // time steps of an untimed run before measuring, >= 1
  Precision precision = Precision::f32;
  NeuronParams neuron = NeuronParams::make_lif();
  std::size_t n_inputs = 140;
  std::size_t n_classes = 3;
  std::uint64_t seed = 0;
  std::size_t max_dense_elements = std::size_t{1} << 27;

  /// Throws std::invalid_argument.
  void validate() const;
};

struct BenchRecord {
  Method method = Method::eprop_sparse;
  std::size_t n_hidden = 0;
  std::size_t timesteps = 0;
  double mean_step_ms = 0.0;
  double std_step_ms = 0.0;
  std::size_t peak_bytes = 0;
  std::uint64_t seed = 0;
};

/// Times `repeats` gradient computations per cell after a warm-up.
/// Input generation and network initialization are not timed.
/// Throws ResourceLimit for dense methods beyond the cap.
std::vector<BenchRecord> bench_time(const BenchConfig& cfg);

/// One gradient computation per cell inside a fresh arena; peak_bytes is its
/// high-water mark. mean_step_ms comes from that single run, std is 0.
std::vector<BenchRecord> bench_memory(const BenchConfig& cfg);

/// Timing and memory of a single cell.
BenchRecord bench_cell(const BenchConfig& cfg, Method method, std::size_t n_hidden, std::size_t timesteps,
                       std::size_t repeats);

/// Header "method,n_hidden,timesteps,mean_step_ms,std_step_ms,peak_bytes,seed".
void write_bench_csv(std::span<const BenchRecord> records, std::ostream& out);

}  // namespace sparseprop
