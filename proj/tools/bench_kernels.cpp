// Compares the OpenMP kernels against the serial reference implementations:
// same inputs, wall-clock medians, and the worst element-wise disagreement.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <vector>

#include "fedelm/matrix.hpp"

using namespace fedelm;
using Clock = std::chrono::steady_clock;

namespace {

Matrix random_matrix(std::mt19937_64& gen, std::size_t r, std::size_t c) {
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Matrix m(r, c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) m(i, j) = dist(gen);
    return m;
}

template <typename F>
double median_ms(F&& f, int reps) {
    std::vector<double> ms;
    ms.reserve(static_cast<std::size_t>(reps));
    for (int i = 0; i < reps; ++i) {
        const auto t0 = Clock::now();
        f();
        const auto t1 = Clock::now();
        ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    std::sort(ms.begin(), ms.end());
    return ms[ms.size() / 2];
}

void bench_matmul(std::mt19937_64& gen, std::size_t n, int reps) {
    const Matrix a = random_matrix(gen, n, n);
    const Matrix b = random_matrix(gen, n, n);
    Matrix out_par(n, n), out_ser(n, n);
    const double par = median_ms([&] { out_par = matmul(a, b); }, reps);
    const double ser = median_ms([&] { out_ser = serial::matmul(a, b); }, reps);
    std::printf("matmul   n=%4zu  parallel %8.3f ms  serial %8.3f ms  speedup %5.2fx  "
                "max|diff| %.3e\n",
                n, par, ser, ser / par, max_abs_diff(out_par, out_ser));
}

void bench_cholesky(std::mt19937_64& gen, std::size_t n, int reps) {
    const Matrix a = random_matrix(gen, n, n);
    Matrix spd = matmul(transpose(a), a);
    for (std::size_t i = 0; i < n; ++i) spd(i, i) += static_cast<double>(n);
    Matrix l_par(n, n), l_ser(n, n);
    const double par = median_ms([&] { l_par = cholesky(spd, 0.0); }, reps);
    const double ser = median_ms([&] { l_ser = serial::cholesky(spd, 0.0); }, reps);
    std::printf("cholesky n=%4zu  parallel %8.3f ms  serial %8.3f ms  speedup %5.2fx  "
                "max|diff| %.3e\n",
                n, par, ser, ser / par, max_abs_diff(l_par, l_ser));
}

}  // namespace

int main(int argc, char** argv) {
    const int reps = argc > 1 ? std::atoi(argv[1]) : 7;
    std::mt19937_64 gen(12345);
    std::printf("median of %d repetitions per kernel\n", reps);
    for (std::size_t n : {64, 128, 256, 512}) bench_matmul(gen, n, reps);
    for (std::size_t n : {64, 128, 256, 512}) bench_cholesky(gen, n, reps);
    return 0;
}
