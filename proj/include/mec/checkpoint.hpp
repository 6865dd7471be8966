#pragma once

#include <string>
#include <vector>

#include "mec/agents.hpp"
#include "mec/baselines.hpp"

namespace mec::rl {

// Versioned JSON record of every network (online + target) and its optimizer
// state. Loading into freshly constructed agents reproduces forwards and
// subsequent updates exactly.
void save_checkpoint(const std::string& path, const std::vector<ClientAgent>& clients,
                     const MasterAgent* master, const CriticAgent* critic);

void load_checkpoint(const std::string& path, std::vector<ClientAgent>& clients, MasterAgent* master,
                     CriticAgent* critic);

} // namespace mec::rl
