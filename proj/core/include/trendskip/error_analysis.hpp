#pragma once

#include <string>
#include <vector>

#include "trendskip/latent.hpp"
#include "trendskip/oracle.hpp"
#include "trendskip/policy.hpp"
#include "trendskip/schedule.hpp"
#include "trendskip/trace.hpp"

namespace trendskip {

enum class BoundNorm { L2, L1 };

/// Per-round bookkeeping extracted from a recorded run via ghost replays:
/// `correction` is the gap between the real output the run saw and the output
/// an error-free continuation would have produced; `segment_residuals` are
/// the true output residuals over the skipped steps relative to the round's
/// error-free base output.
struct LedgerRound {
    int window = 0;   // burst length k
    int t_start = 0;  // timestep of the round's first processed step
    int t_real = 0;   // timestep of the round's real inference
    Latent correction;                     // sigma_r
    Latent round_residual;                 // error-free residual consumed by the trend
    std::vector<Latent> segment_residuals; // k entries, step s at index s-1
};

struct ErrorLedger {
    int warmup = 0;  // n
    double alpha = 0.5;
    std::vector<Latent> warmup_residuals;  // n entries, oldest first
    std::vector<LedgerRound> rounds;
};

/// Direct (non-recursive) evaluation of the exponentially weighted trend
/// after consuming d_list in order: weight (1-a)^(n-1) on the first entry and
/// a*(1-a)^(n-j) on entry j.
Latent closed_form_trend(const std::vector<Latent>& d_list, double alpha);

/// Direct evaluation of the trend in effect during round r (1-based): the
/// warmup trend decayed by (1-2a)^(r-1) plus the weighted
/// (residual + correction) history of earlier rounds.
Latent closed_form_round_trend(const ErrorLedger& ledger, int round_index);

struct RoundError {
    double simulated = 0.0;  // ||ghost end state - recorded end state||_2
    double term_sum = 0.0;   // same gap assembled term by term with f/g weights
};

/// Replays a round's skipped segment with real model calls from the recorded
/// burst-start latent and returns both the simulated end-state gap and its
/// term-by-term assembly; the two agree up to floating-point noise.
RoundError exact_round_error(const RunTrace& trace, const OracleModel& model,
                             const NoiseSchedule& sched, int round_index);

/// First-round relaxed bound: || sum_s ((s/k) * delta - d_segment[s-1]) ||,
/// i.e. the exact expression with every f/g gain replaced by 1.
double relaxed_bound_first_round(const std::vector<Latent>& d_segment, const Latent& delta,
                                 int k1, BoundNorm norm = BoundNorm::L2);

/// General-round relaxed bound with the trend expanded into warmup terms,
/// correction terms with (1-2a) powers, and round-residual history.
double relaxed_bound_general(const ErrorLedger& ledger, int round_index,
                             BoundNorm norm = BoundNorm::L2);

/// The alpha = 0.5 simplification, where the (1-2a) powers vanish and only
/// the previous round survives:
/// || sum_m ((1 + (k-m)/(2k)) * sigma_{r-1} + ((k-m)/(2k)) * d_{r-1} - d_future) ||.
double half_alpha_bound(const ErrorLedger& ledger, int round_index,
                        BoundNorm norm = BoundNorm::L2);

/// Ghost-replay pass over a recorded run (snapshots required), producing the
/// ledger that feeds the bound evaluations.
ErrorLedger build_ledger(const RunTrace& trace, const OracleModel& model,
                         const NoiseSchedule& sched);

struct BoundRow {
    int round = 0;
    int t_start = 0;
    int window = 0;
    double exact_error = 0.0;
    double bound_general = 0.0;
    double bound_half_alpha = 0.0;
    bool violated = false;
};

struct BoundReport {
    std::vector<BoundRow> rows;  // rounds with a nonempty burst only
};

/// Per-round exact error vs. relaxed bounds. Violations are reported, not
/// asserted: dropping the f/g gains inside a signed sum is not a formal upper
/// bound under cancellation, so the honest output is a flag column.
BoundReport bound_report(const RunTrace& trace, const OracleModel& model,
                         const NoiseSchedule& sched);

std::string bound_report_to_csv(const BoundReport& report);

}  // namespace trendskip
