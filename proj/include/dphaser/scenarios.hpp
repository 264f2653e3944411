#pragma once

#include "dphaser/sim.hpp"

namespace dphaser {

// A named starting point for simulation / verification: a pre-linked world
// with all initial local operations (next(), spawns, drops, promotes)
// already injected, so only message deliveries remain to schedule.
struct Scenario {
  std::string name;
  SimWorld world;
};

std::vector<std::string> scenario_names();

// Throws std::invalid_argument for unknown names.
Scenario make_scenario(const std::string& name, Mutation mutation = Mutation::None);

// The scenario on which each seeded defect is detectable.
const std::vector<std::pair<Mutation, std::string>>& mutation_pairings();

}  // namespace dphaser
