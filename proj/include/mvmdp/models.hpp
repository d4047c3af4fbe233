#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "mvmdp/mdp.hpp"

namespace mvmdp {

struct QueueingParams {
  int horizon = 4;
  double capacity = 10.0;     // S
  double max_service = 1.0;   // A
  double max_arrival = 1.0;   // X
  double arrival_prob = 0.5;  // q
  double operating_cost = 2.0;
  double holding_cost = 1.0;
  double delta = 0.01;
  double lambda = 2.0;
  int max_states = 1000000;
};

struct InventoryParams {
  int horizon = 10;
  int capacity = 10;
  int revenue = 4;
  int order_cost = 2;
  int holding_cost = 1;
  int shortage_cost = 3;
  double lambda = 2.0;
};

struct RandomSizes {
  int num_states = 2;
  int num_actions = 2;
  int horizon = 2;
  double lambda = 1.0;
  std::vector<double> reward_grid{0.0, 0.5, 1.0};
  bool random_admissible = false;  // drop actions at random, keeping A(s) nonempty
  int max_cells = 4096;            // cap on |S|·|A|·T
};

TabularMdp build_queueing(const QueueingParams& p);
TabularMdp build_inventory(const InventoryParams& p);
TabularMdp build_random(std::uint64_t seed, const RandomSizes& sizes);

QueueingParams queueing_params_from_json(const nlohmann::json& j);
InventoryParams inventory_params_from_json(const nlohmann::json& j);

}  // namespace mvmdp
