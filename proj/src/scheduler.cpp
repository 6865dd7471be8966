#include "mec/scheduler.hpp"

#include <algorithm>
#include <cmath>

namespace mec::sched {

std::vector<AdmittedTask> schedule_step(std::vector<TaskArrival> admitted, const ServerConfig& cfg) {
    cfg.validate();
    for (const auto& t : admitted) {
        if (!(t.arrival_s >= 0.0) || !(t.service_s >= 0.0) || !std::isfinite(t.arrival_s) ||
            !std::isfinite(t.service_s))
            throw std::invalid_argument("schedule_step: arrivals and services must be finite and >= 0");
    }

    std::sort(admitted.begin(), admitted.end(), [](const TaskArrival& a, const TaskArrival& b) {
        if (a.arrival_s != b.arrival_s) return a.arrival_s < b.arrival_s;
        return a.task_id < b.task_id;
    });

    std::vector<double> unit_free(static_cast<std::size_t>(cfg.units), 0.0);
    std::vector<AdmittedTask> out;
    out.reserve(admitted.size());

    for (const auto& t : admitted) {
        std::size_t best = 0;
        for (std::size_t u = 1; u < unit_free.size(); ++u)
            if (unit_free[u] < unit_free[best]) best = u;
        const double start = std::max(t.arrival_s, unit_free[best]);
        const double finish = start + t.service_s;
        unit_free[best] = finish;
        out.push_back({t.task_id, t.arrival_s, t.service_s, start, finish});
    }
    return out;
}

} // namespace mec::sched
