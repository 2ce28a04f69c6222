#include "idlelab/queueing.hpp"

#include "idlelab/errors.hpp"
#include "idlelab/units.hpp"

#include <cmath>

namespace idlelab {

std::string to_string(QueueKind kind) {
    switch (kind) {
    case QueueKind::MM1:
        return "mm1";
    case QueueKind::CxMM1:
        return "cxmm1";
    case QueueKind::MMc:
        return "mmc";
    }
    return "?";
}

QueueKind queue_kind_from_string(const std::string& name) {
    if (name == "mm1")
        return QueueKind::MM1;
    if (name == "cxmm1")
        return QueueKind::CxMM1;
    if (name == "mmc")
        return QueueKind::MMc;
    throw ValidationError("unknown queue kind '" + name +
                          "' (expected mm1, cxmm1, mmc)");
}

void QueueParams::validate() const {
    if (!(lambda_per_core > 0.0) || !std::isfinite(lambda_per_core))
        throw ValidationError("lambda_per_core must be > 0, got " +
                              format_sig6(lambda_per_core));
    if (!(service_mean > 0.0) || !std::isfinite(service_mean))
        throw ValidationError("service_mean must be > 0, got " +
                              format_sig6(service_mean));
    if (cores < 1)
        throw ValidationError("cores must be >= 1, got " + std::to_string(cores));
    double rho = utilization();
    if (rho >= 1.0)
        throw StabilityError("unstable parameters: utilization rho = " +
                             format_sig6(rho) + " (lambda * service_mean) must be < 1");
}

double busy_fraction(const QueueParams& params) {
    params.validate();
    return params.utilization();
}

IdleLaw core_idle_law(const QueueParams& params) {
    params.validate();
    if (params.kind == QueueKind::MMc)
        throw UnsupportedModelError(
            "per-core idle law is not analytic for M/M/c (depends on the "
            "dispatch policy); use the simulator");
    return {params.lambda_per_core, 1.0 - params.utilization()};
}

IdleLaw package_idle_law(const QueueParams& params) {
    params.validate();
    double c = static_cast<double>(params.cores);
    double aggregate_rate = c * params.lambda_per_core;
    if (params.kind == QueueKind::MMc) {
        double offered = c * params.utilization();
        return {aggregate_rate, erlang_p0(params.cores, offered)};
    }
    // MM1 with cores > 1 is the CxMM1 fan-out; c = 1 degenerates to the
    // core law in both.
    double idle = std::pow(1.0 - params.utilization(), c);
    return {aggregate_rate, idle};
}

double idle_tail_time_weighted(double rate, double t) {
    if (!(rate > 0.0))
        throw DomainError("rate must be > 0, got " + format_sig6(rate));
    if (t < 0.0)
        throw DomainError("t must be >= 0, got " + format_sig6(t));
    double x = rate * t;
    if (x > 700.0)
        return 0.0; // below 1e-300, physically zero
    return (1.0 + x) * std::exp(-x);
}

double idle_tail_count_weighted(double rate, double t) {
    if (!(rate > 0.0))
        throw DomainError("rate must be > 0, got " + format_sig6(rate));
    if (t < 0.0)
        throw DomainError("t must be >= 0, got " + format_sig6(t));
    double x = rate * t;
    if (x > 700.0)
        return 0.0;
    return std::exp(-x);
}

double idle_band_fraction(const QueueParams& params, Level level,
                          double t_lo, double t_hi) {
    if (t_lo < 0.0)
        throw DomainError("band lower edge must be >= 0");
    if (!(t_lo < t_hi))
        throw DomainError("band requires t_lo < t_hi");
    IdleLaw law = level == Level::Core ? core_idle_law(params)
                                       : package_idle_law(params);
    double hi_tail = std::isinf(t_hi) ? 0.0 : idle_tail_time_weighted(law.rate, t_hi);
    return law.idle_fraction * (idle_tail_time_weighted(law.rate, t_lo) - hi_tail);
}

double erlang_p0(int servers, double offered_load) {
    if (servers < 1)
        throw ValidationError("servers must be >= 1, got " + std::to_string(servers));
    if (!(offered_load > 0.0))
        throw DomainError("offered_load must be > 0, got " +
                          format_sig6(offered_load));
    if (offered_load >= static_cast<double>(servers))
        throw StabilityError("unstable M/M/c: offered load a = " +
                             format_sig6(offered_load) + " must be < servers = " +
                             std::to_string(servers));
    double sum = 1.0;  // k = 0 term
    double term = 1.0; // a^k / k!
    for (int k = 1; k < servers; ++k) {
        term *= offered_load / static_cast<double>(k);
        sum += term;
    }
    term *= offered_load / static_cast<double>(servers);
    double rho = offered_load / static_cast<double>(servers);
    sum += term / (1.0 - rho);
    if (std::isinf(sum))
        return 0.0; // empty probability below double range
    return 1.0 / sum;
}

} // namespace idlelab
