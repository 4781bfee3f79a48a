// Serial reference kernels against their OpenMP versions. The second
// argument of every omp benchmark is the thread count.
#include <random>

#include <benchmark/benchmark.h>
#include <omp.h>

#include "catpose/geometry.hpp"
#include "catpose/kernels.hpp"
#include "catpose/random.hpp"
#include "catpose/symmetry.hpp"

using namespace catpose;

namespace {

PointCloud cloud(std::size_t n, std::uint64_t seed) {
  auto rng = make_rng(seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  PointCloud c(n);
  for (auto& p : c) p = {u(rng), u(rng), u(rng)};
  return c;
}

RowMatrix logits(int rows, int cols, std::uint64_t seed) {
  auto rng = make_rng(seed);
  std::normal_distribution<double> g;
  RowMatrix m(rows, cols);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = g(rng);
  return m;
}

void threads(const benchmark::State& state) { omp_set_num_threads(static_cast<int>(state.range(1))); }

template <bool Parallel>
void BM_Chamfer(benchmark::State& state) {
  if (Parallel) threads(state);
  const auto a = cloud(state.range(0), 1), b = cloud(state.range(0), 2);
  for (auto _ : state) {
    auto r = Parallel ? kernels::omp::chamfer(a, b, true) : kernels::serial::chamfer(a, b, true);
    benchmark::DoNotOptimize(r.value);
  }
}

template <bool Parallel>
void BM_SoftmaxMix(benchmark::State& state) {
  if (Parallel) threads(state);
  const int n = static_cast<int>(state.range(0));
  const RowMatrix l = logits(n, n / 2, 3);
  const PointCloud prior = cloud(n / 2, 4);
  RowMatrix probs;
  PointCloud out;
  for (auto _ : state) {
    if (Parallel) {
      kernels::omp::softmax_rows(l, probs);
      kernels::omp::mix_rows(probs, prior, out);
    } else {
      kernels::serial::softmax_rows(l, probs);
      kernels::serial::mix_rows(probs, prior, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Parallel>
void BM_Affinity(benchmark::State& state) {
  if (Parallel) threads(state);
  const int n = static_cast<int>(state.range(0));
  const auto a = cloud(n, 5), b = cloud(n / 2, 6);
  const RowMatrix r = logits(n, n / 2, 7);
  RowMatrix out;
  for (auto _ : state) {
    if (Parallel) {
      kernels::omp::affinity_logits(a, b, r, 300.0, out);
    } else {
      kernels::serial::affinity_logits(a, b, r, 300.0, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Parallel>
void BM_CandidateL1(benchmark::State& state) {
  if (Parallel) threads(state);
  const int n = static_cast<int>(state.range(0));
  const auto c = cloud(n, 8), x = cloud(n, 9);
  std::vector<int> rows(n);
  for (int i = 0; i < n; ++i) rows[i] = i;
  const auto rot = candidate_rotations(Mat3::Identity(), SymmetryClass::rotational_y(36));
  for (auto _ : state) {
    auto v = Parallel ? kernels::omp::candidate_l1(c, x, rows, rot) : kernels::serial::candidate_l1(c, x, rows, rot);
    benchmark::DoNotOptimize(v.data());
  }
}

template <bool Parallel>
void BM_RansacScores(benchmark::State& state) {
  if (Parallel) threads(state);
  const auto s = cloud(state.range(0), 10), t = cloud(state.range(0), 11);
  std::vector<kernels::Hypothesis> hyps(200);
  for (std::size_t k = 0; k < hyps.size(); ++k) hyps[k].rotation = rot_y(0.01 * static_cast<double>(k));
  for (auto _ : state) {
    auto v = Parallel ? kernels::omp::ransac_scores(s, t, hyps, 0.02) : kernels::serial::ransac_scores(s, t, hyps, 0.02);
    benchmark::DoNotOptimize(v.data());
  }
}

void serial_args(benchmark::internal::Benchmark* b) {
  for (int n : {256, 1024}) b->Args({n});
}

void omp_args(benchmark::internal::Benchmark* b) {
  const int max_threads = omp_get_num_procs();
  for (int n : {256, 1024}) {
    for (int t = 1; t <= max_threads; t *= 2) b->Args({n, t});
  }
}

}  // namespace

BENCHMARK(BM_Chamfer<false>)->Apply(serial_args)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Chamfer<true>)->Apply(omp_args)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_SoftmaxMix<false>)->Apply(serial_args)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_SoftmaxMix<true>)->Apply(omp_args)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Affinity<false>)->Apply(serial_args)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Affinity<true>)->Apply(omp_args)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_CandidateL1<false>)->Apply(serial_args)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_CandidateL1<true>)->Apply(omp_args)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_RansacScores<false>)->Apply(serial_args)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_RansacScores<true>)->Apply(omp_args)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
