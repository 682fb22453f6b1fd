#include "sparseprop/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

namespace sparseprop {

void SpikeDataset::validate() const {
  for (const auto& e : events) {
    if (e.sample >= n_samples) throw RangeError("event sample " + std::to_string(e.sample) + " >= n_samples");
    if (e.t >= n_steps) throw RangeError("event time " + std::to_string(e.t) + " >= n_steps");
    if (e.channel >= n_channels) throw RangeError("event channel " + std::to_string(e.channel) + " >= n_channels");
  }
  if (labels.size() != n_samples)
    throw RangeError(std::to_string(labels.size()) + " labels for " + std::to_string(n_samples) + " samples");
}

std::size_t SpikeDataset::n_classes() const {
  return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
}

std::size_t SpikeDataset::spike_count(std::size_t sample) const {
  return static_cast<std::size_t>(
      std::count_if(events.begin(), events.end(), [&](const SpikeEvent& e) { return e.sample == sample; }));
}

SpikeDataset generate_poisson_dataset(std::size_t n_samples, std::size_t n_channels, std::size_t n_steps,
                                      std::size_t n_classes, std::uint64_t seed) {
  if (n_samples == 0 || n_channels == 0 || n_classes == 0)
    throw std::invalid_argument("generate_poisson_dataset: sizes must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> rate_dist(0.01, 0.2);
  std::vector<double> rates(n_classes * n_channels);
  for (auto& r : rates) r = rate_dist(rng);

  SpikeDataset ds;
  ds.n_samples = n_samples;
  ds.n_channels = n_channels;
  ds.n_steps = n_steps;
  ds.labels.resize(n_samples);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t s = 0; s < n_samples; ++s) {
    const std::size_t label = s % n_classes;
    ds.labels[s] = label;
    const double* class_rates = rates.data() + label * n_channels;
    for (std::size_t t = 0; t < n_steps; ++t)
      for (std::size_t c = 0; c < n_channels; ++c)
        if (unit(rng) < class_rates[c]) ds.events.push_back({s, t, c});
  }
  return ds;
}

namespace {

std::vector<std::size_t> parse_fields(const std::string& line, std::size_t expected, std::size_t line_no) {
  std::istringstream ss(line);
  std::vector<std::size_t> out;
  std::string token;
  while (ss >> token) {
    if (token.empty() || token.find_first_not_of("0123456789") != std::string::npos)
      throw ParseError(line_no, "expected a non-negative integer, got '" + token + "'");
    try {
      out.push_back(static_cast<std::size_t>(std::stoull(token)));
    } catch (const std::out_of_range&) {
      throw ParseError(line_no, "integer out of range: '" + token + "'");
    }
  }
  if (out.size() != expected)
    throw ParseError(line_no, "expected " + std::to_string(expected) + " fields, got " + std::to_string(out.size()));
  return out;
}

bool blank(const std::string& line) { return line.find_first_not_of(" \t\r") == std::string::npos; }

std::string trimmed(const std::string& line) {
  const auto first = line.find_first_not_of(" \t\r");
  const auto last = line.find_last_not_of(" \t\r");
  return first == std::string::npos ? std::string{} : line.substr(first, last - first + 1);
}

}  // namespace

SpikeDataset read_spike_dataset(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError(1, "missing header");
  ++line_no;
  SpikeDataset ds;
  {
    std::istringstream ss(line);
    std::string magic, version;
    ss >> magic >> version;
    if (magic != "SPIKES" || version != "v1") throw ParseError(line_no, "expected 'SPIKES v1' header");
    std::string rest;
    std::getline(ss, rest);
    const auto f = parse_fields(rest, 3, line_no);
    ds.n_samples = f[0];
    ds.n_channels = f[1];
    ds.n_steps = f[2];
  }

  bool in_labels = false;
  std::vector<bool> seen(ds.n_samples, false);
  ds.labels.assign(ds.n_samples, 0);
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    if (!in_labels) {
      if (trimmed(line) == "LABELS") {
        in_labels = true;
        continue;
      }
      const auto f = parse_fields(line, 3, line_no);
      const SpikeEvent e{f[0], f[1], f[2]};
      if (e.sample >= ds.n_samples || e.t >= ds.n_steps || e.channel >= ds.n_channels)
        throw RangeError("line " + std::to_string(line_no) + ": event (" + std::to_string(e.sample) + ", " +
                         std::to_string(e.t) + ", " + std::to_string(e.channel) + ") outside header bounds");
      ds.events.push_back(e);
    } else {
      const auto f = parse_fields(line, 2, line_no);
      if (f[0] >= ds.n_samples)
        throw RangeError("line " + std::to_string(line_no) + ": label for sample " + std::to_string(f[0]) +
                         " >= n_samples");
      if (seen[f[0]]) throw ParseError(line_no, "duplicate label for sample " + std::to_string(f[0]));
      seen[f[0]] = true;
      ds.labels[f[0]] = f[1];
    }
  }
  if (!in_labels) throw ParseError(line_no + 1, "missing LABELS section");
  for (std::size_t s = 0; s < ds.n_samples; ++s)
    if (!seen[s]) throw ParseError(line_no + 1, "no label for sample " + std::to_string(s));
  std::sort(ds.events.begin(), ds.events.end());
  return ds;
}

SpikeDataset load_spike_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_spike_dataset(in);
}

void write_spike_dataset(const SpikeDataset& ds, std::ostream& out) {
  ds.validate();
  std::vector<SpikeEvent> events = ds.events;
  std::sort(events.begin(), events.end());
  out << "SPIKES v1 " << ds.n_samples << ' ' << ds.n_channels << ' ' << ds.n_steps << '\n';
  for (const auto& e : events) out << e.sample << ' ' << e.t << ' ' << e.channel << '\n';
  out << "LABELS\n";
  for (std::size_t s = 0; s < ds.n_samples; ++s) out << s << ' ' << ds.labels[s] << '\n';
}

void save_spike_dataset(const SpikeDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_spike_dataset(ds, out);
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

SpikeDataset pool_channels(const SpikeDataset& ds, std::size_t factor) {
  if (factor == 0 || ds.n_channels % factor != 0)
    throw NotDivisible(std::to_string(ds.n_channels) + " channels not divisible by " + std::to_string(factor));
  SpikeDataset out = ds;
  out.n_channels = ds.n_channels / factor;
  for (auto& e : out.events) e.channel /= factor;
  std::sort(out.events.begin(), out.events.end());
  return out;
}

template <typename T>
Sample<T> to_sample(const SpikeDataset& ds, std::size_t sample) {
  if (sample >= ds.n_samples) throw RangeError("sample " + std::to_string(sample) + " >= n_samples");
  Sample<T> s;
  s.steps = ds.n_steps;
  s.channels = ds.n_channels;
  s.inputs.assign(ds.n_steps * ds.n_channels, T{0});
  s.label = ds.labels.at(sample);
  for (const auto& e : ds.events) {
    if (e.sample != sample) continue;
    if (e.t >= ds.n_steps || e.channel >= ds.n_channels) throw RangeError("event outside dataset bounds");
    s.inputs[e.t * ds.n_channels + e.channel] += T{1};
  }
  return s;
}

template <typename T>
std::vector<Sample<T>> to_samples(const SpikeDataset& ds) {
  ds.validate();
  std::vector<Sample<T>> out;
  out.reserve(ds.n_samples);
  for (std::size_t s = 0; s < ds.n_samples; ++s) out.push_back(to_sample<T>(ds, s));
  return out;
}

template Sample<float> to_sample<float>(const SpikeDataset&, std::size_t);
template Sample<double> to_sample<double>(const SpikeDataset&, std::size_t);
template std::vector<Sample<float>> to_samples<float>(const SpikeDataset&);
template std::vector<Sample<double>> to_samples<double>(const SpikeDataset&);

}  // namespace sparseprop
