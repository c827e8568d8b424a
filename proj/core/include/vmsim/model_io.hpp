#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "vmsim/dqn.hpp"
#include "vmsim/lstm.hpp"
#include "vmsim/mlp.hpp"

namespace vmsim {

// JSON model files. Parameter matrices are flat row-major arrays; numbers
// are written in shortest round-trip form, so save/load is bit-exact.

std::string lstm_to_json(const LstmModel& model);
LstmModel lstm_from_json(const std::string& text);
void save_lstm(const LstmModel& model, const std::filesystem::path& path);
LstmModel load_lstm(const std::filesystem::path& path);

std::string mlp_to_json(const MlpModel& model);
MlpModel mlp_from_json(const std::string& text);
void save_mlp(const MlpModel& model, const std::filesystem::path& path);
MlpModel load_mlp(const std::filesystem::path& path);

// A saved policy is the Q-network plus the ordered action descriptors, so a
// file is replayable against a matching scenario.
struct SavedPolicy {
    dqn::QNetwork net;
    std::vector<std::string> actions;
};

std::string policy_to_json(const dqn::QNetwork& net, const std::vector<std::string>& actions);
SavedPolicy policy_from_json(const std::string& text);
void save_policy(const dqn::QNetwork& net, const std::vector<std::string>& actions,
                 const std::filesystem::path& path);
SavedPolicy load_policy(const std::filesystem::path& path);

} // namespace vmsim
