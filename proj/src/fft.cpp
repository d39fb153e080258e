#include "bphila/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <stdexcept>
#include <tuple>

#include "bphila/tensor.hpp"

namespace bphila::fft {
namespace {

// FFTW's planner is not thread-safe; execution of an existing plan on new
// arrays is. Plans are created once per (shape, direction) under a lock and
// reused through the new-array execute interface.
class PlanCache {
 public:
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  fftw_plan get(std::size_t h, std::size_t w, int sign) {
    std::lock_guard lock(mutex_);
    const auto key = std::make_tuple(h, w, sign);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    std::vector<Complex> scratch(h * w);
    auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
    fftw_plan plan = fftw_plan_dft_2d(static_cast<int>(h), static_cast<int>(w), buf, buf, sign,
                                      FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (plan == nullptr) throw std::runtime_error("fftw: planning failed");
    plans_.emplace(key, plan);
    return plan;
  }

 private:
  std::mutex mutex_;
  std::map<std::tuple<std::size_t, std::size_t, int>, fftw_plan> plans_;
};

PlanCache& cache() {
  static PlanCache instance;
  return instance;
}

void execute(std::span<Complex> data, std::size_t h, std::size_t w, int sign) {
  if (data.size() != h * w) throw std::invalid_argument("fft: buffer size mismatch");
  fftw_plan plan = cache().get(h, w, sign);
  auto* buf = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(plan, buf, buf);
}

}  // namespace

void forward(std::span<Complex> data, std::size_t h, std::size_t w) {
  execute(data, h, w, FFTW_FORWARD);
}

void inverse(std::span<Complex> data, std::size_t h, std::size_t w) {
  execute(data, h, w, FFTW_BACKWARD);
  const double inv = 1.0 / static_cast<double>(h * w);
  scale(inv, std::span<double>(reinterpret_cast<double*>(data.data()), 2 * data.size()));
}

std::vector<Complex> forward_real(std::span<const double> data, std::size_t h, std::size_t w) {
  std::vector<Complex> out(data.begin(), data.end());
  forward(out, h, w);
  return out;
}

std::vector<double> inverse_real(std::vector<Complex> data, std::size_t h, std::size_t w) {
  inverse(data, h, w);
  std::vector<double> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) out[i] = data[i].real();
  return out;
}

}  // namespace bphila::fft
