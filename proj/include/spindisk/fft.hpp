#pragma once

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <stdexcept>
#include <vector>

namespace spindisk {

// Plans are made with FFTW_ESTIMATE so the same length always gets the same
// algorithm; this keeps repeated runs bitwise identical.
class FFTPlan {
public:
    explicit FFTPlan(int n) : n_(n) {
        if (n <= 0) throw std::invalid_argument("FFTPlan: length must be positive");
        buf_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * static_cast<std::size_t>(n)));
        if (!buf_) throw std::runtime_error("FFTPlan: allocation failed");
        fwd_ = fftw_plan_dft_1d(n, buf_, buf_, FFTW_FORWARD, FFTW_ESTIMATE);
        bwd_ = fftw_plan_dft_1d(n, buf_, buf_, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    FFTPlan(const FFTPlan&) = delete;
    FFTPlan& operator=(const FFTPlan&) = delete;
    ~FFTPlan() {
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(bwd_);
        fftw_free(buf_);
    }

    int size() const { return n_; }

    // out[k] = sum_j in[j] exp(-2 pi i jk/n), unnormalized
    void forward(const std::complex<double>* in, std::complex<double>* out) const { run(fwd_, in, out); }
    // out[j] = sum_k in[k] exp(+2 pi i jk/n), unnormalized
    void backward(const std::complex<double>* in, std::complex<double>* out) const { run(bwd_, in, out); }

private:
    void run(fftw_plan p, const std::complex<double>* in, std::complex<double>* out) const {
        auto* b = reinterpret_cast<std::complex<double>*>(buf_);
        for (int j = 0; j < n_; ++j) b[j] = in[j];
        fftw_execute(p);
        for (int j = 0; j < n_; ++j) out[j] = b[j];
    }

    int n_;
    fftw_complex* buf_ = nullptr;
    fftw_plan fwd_{};
    fftw_plan bwd_{};
};

inline const FFTPlan& fft_plan(int n) {
    thread_local std::map<int, std::unique_ptr<FFTPlan>> cache;
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, std::make_unique<FFTPlan>(n)).first;
    return *it->second;
}

// Fourier coefficients c_k with f(theta_j) = sum_k c_k e^{i k theta_j}; index k in [0,n),
// negative frequencies wrapped.
inline std::vector<std::complex<double>> fourier_coefficients(const std::vector<std::complex<double>>& f) {
    const int n = static_cast<int>(f.size());
    std::vector<std::complex<double>> c(f.size());
    fft_plan(n).forward(f.data(), c.data());
    for (auto& v : c) v /= static_cast<double>(n);
    return c;
}

inline std::vector<std::complex<double>> fourier_synthesis(const std::vector<std::complex<double>>& c) {
    const int n = static_cast<int>(c.size());
    std::vector<std::complex<double>> f(c.size());
    fft_plan(n).backward(c.data(), f.data());
    return f;
}

// signed frequency of wrapped index k (Nyquist reported as +n/2)
inline int signed_mode(int k, int n) { return k <= n / 2 ? k : k - n; }

} // namespace spindisk
