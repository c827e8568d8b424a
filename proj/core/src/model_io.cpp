#include "vmsim/model_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "vmsim/errors.hpp"
#include "vmsim/trace.hpp"

namespace vmsim {

namespace {

using nlohmann::json;

std::string number_array(const std::vector<double>& values) {
    std::string out = "[";
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ",";
        out += format_double(values[i]);
    }
    out += "]";
    return out;
}

std::vector<double> flatten(const Eigen::MatrixXd& m) {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
    return out;
}

std::vector<double> flatten(const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::MatrixXd unflatten(const std::vector<double>& flat, Eigen::Index rows, Eigen::Index cols,
                          const std::string& name) {
    if (static_cast<Eigen::Index>(flat.size()) != rows * cols)
        throw ParseError(name + ": expected " + std::to_string(rows * cols) + " values, got " +
                         std::to_string(flat.size()));
    Eigen::MatrixXd m(rows, cols);
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = flat[k++];
    return m;
}

Eigen::VectorXd to_vector(const std::vector<double>& flat, Eigen::Index size,
                          const std::string& name) {
    if (static_cast<Eigen::Index>(flat.size()) != size)
        throw ParseError(name + ": expected " + std::to_string(size) + " values, got " +
                         std::to_string(flat.size()));
    return Eigen::Map<const Eigen::VectorXd>(flat.data(), size);
}

json parse_json(const std::string& text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(what + ": " + e.what());
    }
}

void expect_keys(const json& j, std::initializer_list<const char*> keys,
                 const std::string& what) {
    if (!j.is_object()) throw ParseError(what + ": expected a JSON object");
    for (const char* key : keys)
        if (!j.contains(key)) throw ParseError(what + ": missing key \"" + key + "\"");
    for (const auto& [key, value] : j.items()) {
        (void)value;
        bool known = false;
        for (const char* k : keys) known = known || key == k;
        if (!known) throw ParseError(what + ": unknown key \"" + key + "\"");
    }
}

std::vector<double> number_list(const json& j, const std::string& name) {
    if (!j.is_array()) throw ParseError(name + ": expected an array of numbers");
    std::vector<double> out;
    out.reserve(j.size());
    for (const auto& v : j) {
        if (!v.is_number()) throw ParseError(name + ": expected an array of numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

std::string mlp_json_text(const MlpModel& model, const std::string& indent) {
    std::ostringstream out;
    out << "{\n";
    out << indent << "  \"dims\": [";
    const std::vector<int> dims = model.dims();
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (i) out << ",";
        out << dims[i];
    }
    out << "],\n";
    out << indent << "  \"activation\": \""
        << (model.activation == Activation::ReLU ? "relu" : "tanh") << "\",\n";
    out << indent << "  \"layer_weights\": [";
    for (int l = 0; l < model.layer_count(); ++l) {
        if (l) out << ",";
        out << "\n" << indent << "    "
            << number_array(flatten(model.layer_weights[static_cast<std::size_t>(l)]));
    }
    out << "\n" << indent << "  ],\n";
    out << indent << "  \"layer_biases\": [";
    for (int l = 0; l < model.layer_count(); ++l) {
        if (l) out << ",";
        out << "\n" << indent << "    "
            << number_array(flatten(model.layer_biases[static_cast<std::size_t>(l)]));
    }
    out << "\n" << indent << "  ]\n";
    out << indent << "}";
    return out.str();
}

MlpModel mlp_from_json_value(const json& j, const std::string& what) {
    expect_keys(j, {"dims", "activation", "layer_weights", "layer_biases"}, what);

    std::vector<int> dims;
    if (!j["dims"].is_array()) throw ParseError(what + ": dims must be an array");
    for (const auto& d : j["dims"]) {
        if (!d.is_number_integer()) throw ParseError(what + ": dims must be integers");
        dims.push_back(d.get<int>());
    }
    if (dims.size() < 2) throw ParseError(what + ": dims needs at least two entries");

    const std::string act = j["activation"].is_string() ? j["activation"].get<std::string>() : "";
    MlpModel model;
    if (act == "tanh")
        model.activation = Activation::Tanh;
    else if (act == "relu")
        model.activation = Activation::ReLU;
    else
        throw ParseError(what + ": activation must be \"tanh\" or \"relu\"");

    const json& weights = j["layer_weights"];
    const json& biases = j["layer_biases"];
    if (!weights.is_array() || weights.size() != dims.size() - 1)
        throw ParseError(what + ": layer_weights must have one entry per layer");
    if (!biases.is_array() || biases.size() != dims.size() - 1)
        throw ParseError(what + ": layer_biases must have one entry per layer");
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const auto rows = static_cast<Eigen::Index>(dims[l + 1]);
        const auto cols = static_cast<Eigen::Index>(dims[l]);
        model.layer_weights.push_back(
            unflatten(number_list(weights[l], what + ": layer_weights"), rows, cols,
                      what + ": layer_weights[" + std::to_string(l) + "]"));
        model.layer_biases.push_back(
            to_vector(number_list(biases[l], what + ": layer_biases"), rows,
                      what + ": layer_biases[" + std::to_string(l) + "]"));
    }
    try {
        model.validate();
    } catch (const Error& e) {
        throw ParseError(what + ": " + e.what());
    }
    return model;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open file");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << text << "\n";
    if (!out) throw Error("write failed for " + path.string());
}

} // namespace

std::string lstm_to_json(const LstmModel& model) {
    std::ostringstream out;
    out << "{\n";
    out << "  \"input_dim\": " << model.input_dim << ",\n";
    out << "  \"hidden_dim\": " << model.hidden_dim << ",\n";
    out << "  \"output_dim\": " << model.output_dim << ",\n";
    out << "  \"W_f\": " << number_array(flatten(model.W_f)) << ",\n";
    out << "  \"W_i\": " << number_array(flatten(model.W_i)) << ",\n";
    out << "  \"W_o\": " << number_array(flatten(model.W_o)) << ",\n";
    out << "  \"W_c\": " << number_array(flatten(model.W_c)) << ",\n";
    out << "  \"b_f\": " << number_array(flatten(model.b_f)) << ",\n";
    out << "  \"b_i\": " << number_array(flatten(model.b_i)) << ",\n";
    out << "  \"b_o\": " << number_array(flatten(model.b_o)) << ",\n";
    out << "  \"b_c\": " << number_array(flatten(model.b_c)) << ",\n";
    out << "  \"W_out\": " << number_array(flatten(model.W_out)) << ",\n";
    out << "  \"b_out\": " << number_array(flatten(model.b_out)) << "\n";
    out << "}";
    return out.str();
}

LstmModel lstm_from_json(const std::string& text) {
    const json j = parse_json(text, "LSTM model");
    expect_keys(j,
                {"input_dim", "hidden_dim", "output_dim", "W_f", "W_i", "W_o", "W_c", "b_f",
                 "b_i", "b_o", "b_c", "W_out", "b_out"},
                "LSTM model");
    LstmModel model;
    for (const char* key : {"input_dim", "hidden_dim", "output_dim"})
        if (!j[key].is_number_integer() || j[key].get<int>() < 1)
            throw ParseError(std::string("LSTM model: ") + key + " must be a positive integer");
    model.input_dim = j["input_dim"].get<int>();
    model.hidden_dim = j["hidden_dim"].get<int>();
    model.output_dim = j["output_dim"].get<int>();

    const auto H = static_cast<Eigen::Index>(model.hidden_dim);
    const auto Z = static_cast<Eigen::Index>(model.hidden_dim + model.input_dim);
    const auto O = static_cast<Eigen::Index>(model.output_dim);
    model.W_f = unflatten(number_list(j["W_f"], "W_f"), H, Z, "W_f");
    model.W_i = unflatten(number_list(j["W_i"], "W_i"), H, Z, "W_i");
    model.W_o = unflatten(number_list(j["W_o"], "W_o"), H, Z, "W_o");
    model.W_c = unflatten(number_list(j["W_c"], "W_c"), H, Z, "W_c");
    model.b_f = to_vector(number_list(j["b_f"], "b_f"), H, "b_f");
    model.b_i = to_vector(number_list(j["b_i"], "b_i"), H, "b_i");
    model.b_o = to_vector(number_list(j["b_o"], "b_o"), H, "b_o");
    model.b_c = to_vector(number_list(j["b_c"], "b_c"), H, "b_c");
    model.W_out = unflatten(number_list(j["W_out"], "W_out"), O, H, "W_out");
    model.b_out = to_vector(number_list(j["b_out"], "b_out"), O, "b_out");
    try {
        model.validate();
    } catch (const Error& e) {
        throw ParseError(std::string("LSTM model: ") + e.what());
    }
    return model;
}

void save_lstm(const LstmModel& model, const std::filesystem::path& path) {
    write_file(path, lstm_to_json(model));
}

LstmModel load_lstm(const std::filesystem::path& path) {
    try {
        return lstm_from_json(read_file(path));
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

std::string mlp_to_json(const MlpModel& model) { return mlp_json_text(model, ""); }

MlpModel mlp_from_json(const std::string& text) {
    return mlp_from_json_value(parse_json(text, "MLP model"), "MLP model");
}

void save_mlp(const MlpModel& model, const std::filesystem::path& path) {
    write_file(path, mlp_to_json(model));
}

MlpModel load_mlp(const std::filesystem::path& path) {
    try {
        return mlp_from_json(read_file(path));
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

std::string policy_to_json(const dqn::QNetwork& net, const std::vector<std::string>& actions) {
    std::ostringstream out;
    out << "{\n";
    out << "  \"model\": " << mlp_json_text(net.model, "  ") << ",\n";
    out << "  \"actions\": [";
    for (std::size_t i = 0; i < actions.size(); ++i) {
        if (i) out << ",";
        out << "\n    \"" << json_escape(actions[i]) << "\"";
    }
    out << "\n  ]\n";
    out << "}";
    return out.str();
}

SavedPolicy policy_from_json(const std::string& text) {
    const json j = parse_json(text, "policy file");
    expect_keys(j, {"model", "actions"}, "policy file");
    SavedPolicy policy;
    policy.net.model = mlp_from_json_value(j["model"], "policy file: model");
    if (!j["actions"].is_array()) throw ParseError("policy file: actions must be an array");
    for (const auto& a : j["actions"]) {
        if (!a.is_string()) throw ParseError("policy file: actions must be strings");
        policy.actions.push_back(a.get<std::string>());
    }
    if (policy.actions.size() != static_cast<std::size_t>(policy.net.model.output_dim()))
        throw ParseError("policy file: action count does not match the network output");
    return policy;
}

void save_policy(const dqn::QNetwork& net, const std::vector<std::string>& actions,
                 const std::filesystem::path& path) {
    write_file(path, policy_to_json(net, actions));
}

SavedPolicy load_policy(const std::filesystem::path& path) {
    try {
        return policy_from_json(read_file(path));
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

} // namespace vmsim
