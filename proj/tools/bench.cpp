// Serial vs OpenMP timing for the Neumann kernel and the dataset synthesis.

#include <chrono>
#include <cstdio>

#include <omp.h>

#include "mi/emsim.hpp"
#include "mi/pipeline.hpp"
#include "mi/scenario.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

void bench_mutual_inductance(int segments_per_turn) {
    mi::emsim::SpiderwebSpec spec;
    spec.segments_per_turn = segments_per_turn;
    const auto a = mi::emsim::build_spiderweb(
        spec, mi::Pose{mi::Vec3(0, 0, 0), mi::Vec3(0, 0, 1)});
    const auto b = mi::emsim::build_spiderweb(
        spec, mi::Pose{mi::Vec3(0.8, 0.3, 1.1), mi::Vec3(0.2, 0.3, 0.93).normalized()});

    auto t0 = Clock::now();
    const double m_serial = mi::emsim::mutual_inductance_serial(a, b, mi::kVacuumPermeability);
    const double t_serial = seconds_since(t0);

    t0 = Clock::now();
    const double m_parallel = mi::emsim::mutual_inductance(a, b, mi::kVacuumPermeability);
    const double t_parallel = seconds_since(t0);

    std::printf("neumann  spt=%-4d  serial %8.3f ms   omp %8.3f ms   speedup %.2fx   %s\n",
                segments_per_turn, 1e3 * t_serial, 1e3 * t_parallel, t_serial / t_parallel,
                m_serial == m_parallel ? "bit-identical" : "MISMATCH");
}

void bench_synthesis() {
    auto sc = mi::harness::default_scenario();
    sc.grid.count_z = 2; // 3 x 3 x 2 x 6 = 108 deployments

    const auto t0 = Clock::now();
    const auto deps = mi::harness::synthesize_measurements(sc);
    const double t = seconds_since(t0);
    std::printf("synthesis  %zu deployments x %zu anchors  %8.3f s  (%d threads)\n",
                deps.size(), sc.anchors.size(), t, omp_get_max_threads());
}

} // namespace

int main() {
    std::printf("threads available: %d\n", omp_get_max_threads());
    for (const int spt : {64, 128, 256})
        bench_mutual_inductance(spt);
    bench_synthesis();
    return 0;
}
