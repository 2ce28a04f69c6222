#pragma once

#include <limits>
#include <string>

namespace idlelab {

enum class QueueKind { MM1, CxMM1, MMc };

std::string to_string(QueueKind kind);
QueueKind queue_kind_from_string(const std::string& name);

// Queue description. lambda_per_core is always the per-core arrival rate;
// the M/M/c aggregate arrival rate is cores * lambda_per_core, so the
// per-server utilization is lambda_per_core * service_mean for all kinds.
struct QueueParams {
    QueueKind kind = QueueKind::MM1;
    double lambda_per_core = 0.0; // arrivals per second
    double service_mean = 0.0;    // seconds
    int cores = 1;

    double utilization() const { return lambda_per_core * service_mean; }

    // Throws ValidationError/StabilityError on bad or unstable parameters.
    void validate() const;
};

// Exponential law of one idle-period population plus its wall-clock share.
struct IdleLaw {
    double rate = 0.0;          // events per second
    double idle_fraction = 0.0; // fraction of wall-clock time idle
};

enum class Level { Core, Package };

inline constexpr double kUnbounded = std::numeric_limits<double>::infinity();

// Fraction of time a server is busy (rho). StabilityError when rho >= 1.
double busy_fraction(const QueueParams& params);

// Per-core idle periods: Exp(lambda), wall-clock share 1 - rho.
// UnsupportedModelError for MMc (per-core idle depends on dispatch policy).
IdleLaw core_idle_law(const QueueParams& params);

// All-cores-idle periods. CxMM1 (and MM1 fan-out): rate = c*lambda,
// fraction (1-rho)^c. MMc: rate = c*lambda, fraction erlang_p0(c, c*rho).
IdleLaw package_idle_law(const QueueParams& params);

// Fraction of total idle *time* contributed by idle periods of duration
// >= t, for an Exp(rate) idle-period law: (1 + rate*t) * exp(-rate*t).
// 1 at t = 0, monotone non-increasing, clamped to 0 once rate*t > 700.
double idle_tail_time_weighted(double rate, double t);

// Fraction of idle *periods* lasting >= t: exp(-rate*t). Optional output,
// reported only under an explicit count-weighted label.
double idle_tail_count_weighted(double rate, double t);

// Fraction of total wall-clock time inside idle periods whose full duration
// lies in [t_lo, t_hi). Pass kUnbounded for an open-ended band.
double idle_band_fraction(const QueueParams& params, Level level,
                          double t_lo, double t_hi);

// Probability an M/M/c system is empty. offered_load = c * rho.
double erlang_p0(int servers, double offered_load);

} // namespace idlelab
