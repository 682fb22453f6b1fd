#pragma once

// Spike-event datasets: synthetic Poisson generation, the SPIKES v1 text
// format and channel pooling.
//
//   SPIKES v1 <n_samples> <n_channels> <n_steps>
//   <sample> <t> <channel>        one line per event
//   LABELS
//   <sample> <class>              one line per sample
//
// Events are kept sorted by (sample, t, channel). A repeated event means a
// count above one, which is how pooled datasets are represented.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "sparseprop/network.hpp"

namespace sparseprop {

struct SpikeEvent {
  std::size_t sample = 0;
  std::size_t t = 0;
  std::size_t channel = 0;

  auto operator<=>(const SpikeEvent&) const = default;
};

struct SpikeDataset {
  std::size_t n_samples = 0;
  std::size_t n_channels = 0;
  std::size_t n_steps = 0;
  std::vector<SpikeEvent> events;
  std::vector<std::size_t> labels;  // labels[sample]

  /// Throws RangeError on an out-of-bound event or a missing label.
  void validate() const;
  /// One more than the largest label.
  std::size_t n_classes() const;
  /// Number of events belonging to one sample.
  std::size_t spike_count(std::size_t sample) const;
};

/// Each class draws a rate per channel uniformly in [0.01, 0.2]; sample s has
/// class s mod n_classes and spikes independently per step at its class rates.
SpikeDataset generate_poisson_dataset(std::size_t n_samples, std::size_t n_channels, std::size_t n_steps,
                                      std::size_t n_classes, std::uint64_t seed);

/// Throws ParseError (with line number) or RangeError.
SpikeDataset read_spike_dataset(std::istream& in);
SpikeDataset load_spike_dataset(const std::filesystem::path& path);

void write_spike_dataset(const SpikeDataset& ds, std::ostream& out);
/// Throws std::runtime_error when the file cannot be written.
void save_spike_dataset(const SpikeDataset& ds, const std::filesystem::path& path);

/// Channel c becomes c / factor; counts add up. Throws NotDivisible.
SpikeDataset pool_channels(const SpikeDataset& ds, std::size_t factor);

/// Dense steps x channels event counts of one sample. Throws RangeError.
template <typename T>
Sample<T> to_sample(const SpikeDataset& ds, std::size_t sample);

template <typename T>
std::vector<Sample<T>> to_samples(const SpikeDataset& ds);

}  // namespace sparseprop
