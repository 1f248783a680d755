#include "cdjp/batch.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>

namespace cdjp {

void BatchSpec::validate() const {
    if (n_traj < 1) throw ValidationError("BatchSpec: n_traj must be >= 1");
    if (rho0.rows() != rho_target.rows())
        throw DimensionMismatch("BatchSpec: initial/target dimensions differ");
    if (!is_pure(rho_target)) throw NonPureInput("BatchSpec: target state must be pure");
    const long n = std::lround(t_f / dt);
    if (std::abs(n * dt - t_f) > 1e-9) throw ValidationError("BatchSpec: t_f/dt not integral");
    if (bins < 1) throw ValidationError("BatchSpec: bins must be >= 1");
}

namespace {

FidelityHistogram histogram_from(const std::vector<double>& fid, long failures, int bins,
                                 const std::vector<double>& thresholds) {
    FidelityHistogram h;
    h.failures = failures;
    h.n = long(fid.size());
    h.bin_edges.resize(bins + 1);
    for (int b = 0; b <= bins; ++b) h.bin_edges[b] = double(b) / bins;
    h.counts.assign(bins, 0);
    for (double f : fid) {
        int idx = int(std::floor(f * bins));
        idx = std::clamp(idx, 0, bins - 1);
        ++h.counts[idx];
    }
    for (double thr : thresholds) {
        long above = 0;
        for (double f : fid)
            if (f > thr) ++above;
        h.fractions_above[thr] = h.n > 0 ? double(above) / double(h.n) : 0.0;
    }
    return h;
}

}  // namespace

BatchResult run_batch(const BatchSpec& spec, const OperatorSet& ops, int n_threads) {
    spec.validate();
    const long n_steps = std::lround(spec.t_f / spec.dt);
    if (n_steps > 0 && spec.control.dt > spec.dt * (1 + 1e-9))
        throw ValidationError("run_batch: schedule must be sampled at least every dt");

    std::vector<double> fid(spec.n_traj, -1.0);
    std::atomic<long> failures{0};

    bool pure_path = true;
    Vec psi0, psit;
    try {
        psi0 = ket_from_density(spec.rho0);
    } catch (const NonPureInput&) {
        pure_path = false;
    }
    psit = ket_from_density(spec.rho_target);

    std::atomic<int> next{0};
    auto worker = [&]() {
        KetPropagator prop(ops, spec.tau, spec.dt);
        Vec psi(ops.dim);
        for (int i = next.fetch_add(1); i < spec.n_traj; i = next.fetch_add(1)) {
            const NoiseStream noise{spec.base_seed, std::uint64_t(i)};
            try {
                if (pure_path) {
                    psi = psi0;
                    for (long k = 0; k < n_steps; ++k) {
                        const double tk = k * spec.dt;
                        prop.ito_step(psi, noise.wiener(std::uint64_t(k), spec.dt),
                                      spec.control.theta_at(tk), spec.control.lambda1_at(tk));
                    }
                    fid[i] = fidelity_ket(psi, psit);
                } else {
                    const TrajectoryRecord rec =
                        simulate_trajectory(spec.rho0, spec.control, spec.tau, spec.t_f, spec.dt,
                                            noise, ops, /*record_steps=*/false);
                    fid[i] = fidelity_against_ket(rec.final_state, psit);
                }
            } catch (const PositivityLoss&) {
                failures.fetch_add(1);
                fid[i] = -1.0;
            }
        }
    };

    const int workers = std::max(1, std::min(n_threads, spec.n_traj));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    std::vector<double> ok;
    ok.reserve(fid.size());
    for (double f : fid)
        if (f >= 0) ok.push_back(f);

    BatchResult out;
    out.hist = histogram_from(ok, failures.load(), spec.bins, spec.thresholds);
    if (spec.keep_fidelities) out.fidelities = std::move(fid);
    return out;
}

std::string FidelityHistogram::to_csv() const {
    std::ostringstream os;
    os.precision(12);
    os << "bin_low,bin_high,count\n";
    for (std::size_t b = 0; b + 1 < bin_edges.size(); ++b)
        os << bin_edges[b] << ',' << bin_edges[b + 1] << ',' << counts[b] << '\n';
    return os.str();
}

ComparisonReport compare(const FidelityHistogram& optimal, const FidelityHistogram& sample,
                         const std::vector<double>& thresholds) {
    ComparisonReport rep;
    for (double thr : thresholds) {
        const auto io = optimal.fractions_above.find(thr);
        const auto is = sample.fractions_above.find(thr);
        if (io == optimal.fractions_above.end() || is == sample.fractions_above.end())
            throw ValidationError("compare: threshold missing from a histogram");
        rep.thresholds.push_back(thr);
        rep.fraction_optimal.push_back(io->second);
        rep.fraction_sample.push_back(is->second);
        const double inc = is->second > 0
                               ? 100.0 * (io->second - is->second) / is->second
                               : std::numeric_limits<double>::infinity();
        rep.relative_increase_pct.push_back(inc);
    }
    return rep;
}

std::string ComparisonReport::to_text() const {
    std::ostringstream os;
    os << "threshold  optimal   sample    increase\n";
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
        char line[128];
        std::snprintf(line, sizeof line, "%-9.2f  %6.2f%%   %6.2f%%   %+.1f%%\n", thresholds[i],
                      100 * fraction_optimal[i], 100 * fraction_sample[i],
                      relative_increase_pct[i]);
        os << line;
    }
    return os.str();
}

std::string ComparisonReport::to_csv() const {
    std::ostringstream os;
    os.precision(12);
    os << "threshold,fraction_optimal,fraction_sample,relative_increase_pct\n";
    for (std::size_t i = 0; i < thresholds.size(); ++i)
        os << thresholds[i] << ',' << fraction_optimal[i] << ',' << fraction_sample[i] << ','
           << relative_increase_pct[i] << '\n';
    return os.str();
}

}  // namespace cdjp
