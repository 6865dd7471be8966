#pragma once

#include <stdexcept>
#include <vector>

namespace mec::sched {

struct ServerConfig {
    int units = 1;              // U_e identical processing units
    double unit_speed_hz = 0.0; // f_e
    double storage_bits = 0.0;  // z_e

    void validate() const {
        if (units < 1) throw std::invalid_argument("ServerConfig: need at least one unit");
        if (unit_speed_hz <= 0.0) throw std::invalid_argument("ServerConfig: unit speed must be positive");
        if (storage_bits <= 0.0) throw std::invalid_argument("ServerConfig: storage must be positive");
    }
};

struct TaskArrival {
    int task_id = 0;
    double arrival_s = 0.0; // offload completion time
    double service_s = 0.0; // processing time on one unit
};

struct AdmittedTask {
    int task_id = 0;
    double arrival_s = 0.0;
    double service_s = 0.0;
    double start_s = 0.0;  // max(arrival, earliest unit availability)
    double finish_s = 0.0; // start + service
};

// One step's worth of FIFO scheduling across the server's identical units.
// Tasks are served in arrival order (ties by ascending id); each task takes
// the unit with the smallest current free time. State never carries across
// steps: unfinished work is discarded at the step boundary.
std::vector<AdmittedTask> schedule_step(std::vector<TaskArrival> admitted, const ServerConfig& cfg);

// Total time on the MEC path; identical to the scheduled finish time.
inline double t_mec(const AdmittedTask& t) { return t.finish_s; }

} // namespace mec::sched
