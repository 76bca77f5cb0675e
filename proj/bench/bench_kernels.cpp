#include <benchmark/benchmark.h>

#include "mlt/kernels.hpp"
#include "mlt/rng.hpp"
#include "mlt/sq.hpp"

using namespace mlt;

namespace {

Mat random_cols(int rows, int cols, std::uint64_t seed) {
    Mat m(rows, cols);
    Rng rng(seed);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform();
    for (int c = 0; c < cols; ++c) m.col(c) /= m.col(c).sum();
    return m;
}

template <void (*Kernel)(const Mat&, int, Mat&)>
void BM_shift(benchmark::State& state) {
    const int n = 10, cols = static_cast<int>(state.range(0));
    const Mat V = random_cols(n * n, cols, 1);
    Mat S;
    for (auto _ : state) {
        Kernel(V, n, S);
        benchmark::DoNotOptimize(S.data());
    }
    state.SetItemsProcessed(state.iterations() * cols);
}

template <void (*Kernel)(const Mat&, const Mat&, int, Mat&)>
void BM_shift_back(benchmark::State& state) {
    const int n = 10, cols = static_cast<int>(state.range(0));
    const Mat V = random_cols(n * n, cols, 2), G = random_cols(n * n, cols, 3);
    Mat GV;
    for (auto _ : state) {
        Kernel(V, G, n, GV);
        benchmark::DoNotOptimize(GV.data());
    }
    state.SetItemsProcessed(state.iterations() * cols);
}

template <void (*Kernel)(const Mat&, double, Mat&)>
void BM_softmax(benchmark::State& state) {
    const int cols = static_cast<int>(state.range(0));
    const Mat Z = random_cols(100, cols, 4);
    Mat A;
    for (auto _ : state) {
        Kernel(Z, 25.0, A);
        benchmark::DoNotOptimize(A.data());
    }
    state.SetItemsProcessed(state.iterations() * cols);
}

template <long long (*Count)(int, long long, std::uint64_t)>
void BM_decay_pairs(benchmark::State& state) {
    const int d = static_cast<int>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(Count(d, 2000, 7));
    state.SetItemsProcessed(state.iterations() * 2000);
}

}  // namespace

BENCHMARK(BM_shift<kernels::serial::shift_forward>)->Name("shift_forward/serial")->Arg(100)->Arg(852)->Arg(4096);
BENCHMARK(BM_shift<kernels::omp::shift_forward>)->Name("shift_forward/omp")->Arg(100)->Arg(852)->Arg(4096);
BENCHMARK(BM_shift_back<kernels::serial::shift_backward>)->Name("shift_backward/serial")->Arg(852)->Arg(4096);
BENCHMARK(BM_shift_back<kernels::omp::shift_backward>)->Name("shift_backward/omp")->Arg(852)->Arg(4096);
BENCHMARK(BM_softmax<kernels::serial::softmax_cols>)->Name("softmax_cols/serial")->Arg(100)->Arg(1000);
BENCHMARK(BM_softmax<kernels::omp::softmax_cols>)->Name("softmax_cols/omp")->Arg(100)->Arg(1000);
BENCHMARK(BM_decay_pairs<sq::count_nonzero_pairs_serial>)->Name("decay_pairs/serial")->Arg(3)->Arg(6);
BENCHMARK(BM_decay_pairs<sq::count_nonzero_pairs_omp>)->Name("decay_pairs/omp")->Arg(3)->Arg(6);

BENCHMARK_MAIN();
