#pragma once

// Shared utilities for the test suites: finite-difference gradient checking,
// random tensor construction, and RAII temp directories.

#include <ws/tensor.hpp>
#include <ws/rng.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <string>
#include <vector>

namespace testutil {

inline ws::nn::Tensor random_tensor(std::vector<int> shape, std::uint64_t seed,
                                    double lo = -1.0, double hi = 1.0,
                                    bool requires_grad = true) {
    ws::Rng rng(seed);
    std::vector<double> data(static_cast<std::size_t>(ws::nn::numel_of(shape)));
    for (auto& x : data) x = rng.uniform(lo, hi);
    return ws::nn::Tensor::from(std::move(shape), std::move(data), requires_grad);
}

struct FdReport {
    double max_rel_err = 0.0;
    std::size_t checked = 0;
};

// Central finite differences against the analytic gradient of sum(f(leaf)).
// The functional must rebuild the graph from the leaf on every call so that
// perturbed values propagate.  Gradients accumulate across backward() calls,
// so the leaf gradient is cleared before each analytic pass.
inline FdReport fd_check(ws::nn::Tensor& leaf,
                         const std::function<ws::nn::Tensor()>& f,
                         double h = 1e-5) {
    leaf.zero_grad();
    ws::nn::Tensor total = ws::nn::sum_all(f());
    ws::nn::backward(total);
    std::vector<double> analytic = leaf.grad();

    auto& vals = leaf.value();
    FdReport rep;
    for (std::size_t i = 0; i < vals.size(); ++i) {
        const double keep = vals[i];
        vals[i] = keep + h;
        const double up = ws::nn::sum_all(f()).item();
        vals[i] = keep - h;
        const double dn = ws::nn::sum_all(f()).item();
        vals[i] = keep;
        const double fd = (up - dn) / (2.0 * h);
        const double denom = std::max({std::abs(fd), std::abs(analytic[i]), 1e-8});
        rep.max_rel_err = std::max(rep.max_rel_err, std::abs(fd - analytic[i]) / denom);
        ++rep.checked;
    }
    return rep;
}

class TempDir {
  public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                (tag + "_" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }

  private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in),
                       std::istreambuf_iterator<char>());
}

}  // namespace testutil
