#include "vch/report.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "vch/rng.hpp"

namespace vch {

namespace {

HistoryLabel decode_label(long long index, const std::vector<int>& ancilla_dims) {
    HistoryLabel label(ancilla_dims.size(), 0);
    for (int j = static_cast<int>(ancilla_dims.size()) - 1; j >= 0; --j) {
        const int m = ancilla_dims[static_cast<std::size_t>(j)];
        label[static_cast<std::size_t>(j)] = static_cast<int>(index % m);
        index /= m;
    }
    return label;
}

double count_threshold(const ReadoutConfig& cfg) {
    if (cfg.rule == RetentionRule::poisson_count) return std::ceil(1.0 / (cfg.eps_max * cfg.eps_max));
    return std::sqrt(static_cast<double>(cfg.n_readout)) / cfg.eps_max;
}

}  // namespace

ReadoutResult probability_readout(const BranchedState& state, const ReadoutConfig& cfg) {
    if (!(cfg.eps_max > 0.0 && cfg.eps_max <= 1.0)) throw std::invalid_argument("readout: eps_max must be in (0, 1]");
    if (cfg.n_readout < 1) throw std::invalid_argument("readout: n_readout must be positive");

    const long long n_labels = state.label_count();
    std::vector<double> diag(static_cast<std::size_t>(n_labels));
    for (long long i = 0; i < n_labels; ++i)
        diag[static_cast<std::size_t>(i)] = std::max(0.0, state.sigma_a.at(static_cast<int>(i), static_cast<int>(i)).real());

    const double threshold = count_threshold(cfg);
    ReadoutResult out;
    out.n_readout = cfg.n_readout;

    std::vector<long long> counts(static_cast<std::size_t>(n_labels), 0);
    std::vector<double> prob(static_cast<std::size_t>(n_labels), 0.0);
    if (cfg.sampled) {
        std::vector<double> cum(diag.size(), 0.0);
        double acc = 0.0;
        for (std::size_t i = 0; i < diag.size(); ++i) {
            acc += diag[i];
            cum[i] = acc;
        }
        RngStream rng = RngStream::derive(cfg.seed, "probability_readout");
        for (long long s = 0; s < cfg.n_readout; ++s) {
            const double u = rng.next_uniform() * acc;
            std::size_t i = static_cast<std::size_t>(std::lower_bound(cum.begin(), cum.end(), u) - cum.begin());
            if (i >= counts.size()) i = counts.size() - 1;
            ++counts[i];
        }
        for (std::size_t i = 0; i < counts.size(); ++i)
            prob[i] = static_cast<double>(counts[i]) / static_cast<double>(cfg.n_readout);
    } else {
        for (std::size_t i = 0; i < diag.size(); ++i) {
            prob[i] = diag[i];
            counts[i] = std::llround(diag[i] * static_cast<double>(cfg.n_readout));
        }
    }

    double retained_prob = 0.0;
    for (long long i = 0; i < n_labels; ++i) {
        const auto ix = static_cast<std::size_t>(i);
        const double effective_count = cfg.sampled ? static_cast<double>(counts[ix])
                                                   : prob[ix] * static_cast<double>(cfg.n_readout);
        if (effective_count >= threshold) {
            out.retained.push_back({decode_label(i, state.ancilla_dims), prob[ix], counts[ix]});
            retained_prob += prob[ix];
        }
    }
    std::stable_sort(out.retained.begin(), out.retained.end(),
                     [](const RetainedHistory& a, const RetainedHistory& b) { return a.probability > b.probability; });
    out.remainder_probability = std::max(0.0, 1.0 - retained_prob);
    return out;
}

EpsilonBounds epsilon_bounds(double cost_c, const std::vector<RetainedHistory>& retained,
                             double remainder_probability) {
    if (retained.empty()) throw std::invalid_argument("epsilon_bounds: retained list is empty");
    const double c = std::max(0.0, cost_c);

    EpsilonBounds out;
    double least = retained.front().probability;
    for (const RetainedHistory& r : retained) least = std::min(least, r.probability);

    for (std::size_t i = 0; i < retained.size(); ++i) {
        for (std::size_t j = i + 1; j < retained.size(); ++j) {
            EpsilonPairEntry e;
            e.a = retained[i].label;
            e.b = retained[j].label;
            const double pp = retained[i].probability * retained[j].probability;
            if (pp < 1e-14) {
                e.defined = false;
                e.eps = 0.0;
            } else {
                e.eps = std::sqrt(c / (2.0 * pp));
            }
            out.pairs.push_back(std::move(e));
        }
    }

    out.delta = (least > 0.0) ? std::sqrt(std::max(0.0, remainder_probability) / least) : 0.0;
    out.bound = out.delta;
    for (const EpsilonPairEntry& e : out.pairs)
        if (e.defined) out.bound = std::max(out.bound, e.eps);
    return out;
}

EpsilonBounds epsilon_bounds(const DecoherenceMatrix& d, const std::vector<RetainedHistory>& retained,
                             double remainder_probability) {
    if (d.mode != DecoherenceMatrix::Mode::full)
        throw std::invalid_argument("epsilon_bounds: full-mode decoherence matrix required");
    double c = 0.0;
    for (long long a = 0; a < d.size(); ++a)
        for (long long b = 0; b < d.size(); ++b)
            if (a != b) c += std::norm(d.full_at(a, b));
    return epsilon_bounds(c, retained, remainder_probability);
}

ConsistencyReport consistency_report(const ModelSpec& model, const FamilySpec& family, CostMode which,
                                     const ShotPlan& plan, const ReadoutConfig& readout) {
    const BranchedState state = build_branched_state(model, family);

    ConsistencyReport report;
    report.cost_at_solution = cost_from_state(state, static_cast<int>(model.s_dims.size()), which, plan);

    const ReadoutResult ro = probability_readout(state, readout);
    report.retained = ro.retained;
    report.remainder_probability = ro.remainder_probability;
    report.n_readout = ro.n_readout;

    if (report.retained.empty()) {
        report.high_entropy = true;
        report.delta = 1.0;
        report.epsilon_bound = 1.0;
        return report;
    }

    const EpsilonBounds eb = epsilon_bounds(report.cost_at_solution.c, report.retained, report.remainder_probability);
    report.epsilon_pairs = eb.pairs;
    report.delta = eb.delta;
    report.epsilon_bound = eb.bound;
    return report;
}

ConsistencyReport partial_trace_handoff(const ModelSpec& model, const FamilySpec& family,
                                        const ReadoutConfig& readout, const ShotPlan& plan) {
    return consistency_report(model, family, CostMode::both, plan, readout);
}

}  // namespace vch
