#include <string>

#include "sparseprop/gradients.hpp"

#include "engine_common.hpp"

namespace sparseprop {

std::vector<double> central_differences(const std::function<double(std::span<const double>)>& f,
                                        std::span<const double> x, double h) {
  std::vector<double> point(x.begin(), x.end());
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = point[i];
    point[i] = saved + h;
    const double up = f(point);
    point[i] = saved - h;
    const double down = f(point);
    point[i] = saved;
    out[i] = (up - down) / (2.0 * h);
  }
  return out;
}

namespace {

template <typename T>
bool same_raster(const std::vector<T>& a, const std::vector<T>& b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    if ((a[i] >= T{0}) != (b[i] >= T{0})) return false;
  return true;
}

}  // namespace

template <typename T>
GradAccumulator<T> finite_difference_gradient(const Network<T>& net, const Sample<T>& sample, double h,
                                              const EvalOptions& eval) {
  detail::check_sample(net, sample);
  const bool hard = !eval.smooth_forward;
  const auto base = forward(net, sample, eval, hard);
  Network<T> probe = net;

  auto run = [&](Buffer<T>& block, std::size_t i, const char* name) {
    const T saved = block[i];
    block[i] = saved + static_cast<T>(h);
    const auto up = forward(probe, sample, eval, hard);
    block[i] = saved - static_cast<T>(h);
    const auto down = forward(probe, sample, eval, hard);
    block[i] = saved;
    if (hard && (!same_raster(base.spike_args, up.spike_args) || !same_raster(base.spike_args, down.spike_args)))
      throw SpikeFlipDetected("perturbing " + std::string(name) + "[" + std::to_string(i) + "] by " +
                              std::to_string(h) + " changes the spike raster");
    return static_cast<T>((static_cast<double>(up.loss) - static_cast<double>(down.loss)) / (2.0 * h));
  };

  auto out = detail::empty_accumulator(net);
  out.loss = base.loss;
  out.readout_sum = base.readout_sum;
  out.structure_intact = false;
  out.dw.resize(probe.w.size());
  for (std::size_t i = 0; i < probe.w.size(); ++i) out.dw[i] = run(probe.w, i, "W");
  out.dw_out.resize(probe.w_out.size());
  for (std::size_t i = 0; i < probe.w_out.size(); ++i) out.dw_out[i] = run(probe.w_out, i, "W_out");
  return out;
}

template GradAccumulator<float> finite_difference_gradient<float>(const Network<float>&, const Sample<float>&, double,
                                                                  const EvalOptions&);
template GradAccumulator<double> finite_difference_gradient<double>(const Network<double>&, const Sample<double>&,
                                                                    double, const EvalOptions&);

}  // namespace sparseprop
