#pragma once

// JSON / JSON-lines / CSV formats.
//
//   mdp.json          {n_states, n_actions, discount, transition[s][a][s'], features[s][j]}
//   truth.json        {true_reward, true_theta?, environment}
//   trajectories      one trajectory per line: [[s,a],...]

#include "bgi/environments.hpp"
#include "bgi/mdp.hpp"
#include "bgi/metrics.hpp"

#include "json.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace bgi {

using json = nlohmann::json;

/// Malformed or inconsistent input document.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline const json& field(const json& doc, const char* key, const std::string& where) {
    if (!doc.is_object()) throw FormatError(where + ": expected a JSON object");
    const auto it = doc.find(key);
    if (it == doc.end()) throw FormatError(where + ": missing field '" + key + "'");
    return *it;
}

template <class T>
T get_as(const json& value, const std::string& where) {
    try {
        return value.get<T>();
    } catch (const json::exception& e) {
        throw FormatError(where + ": " + e.what());
    }
}

inline json vector_to_json(const Vector& v) {
    json out = json::array();
    for (double x : v) out.push_back(x);
    return out;
}

inline Vector vector_from_json(const json& doc, const std::string& where) {
    if (!doc.is_array()) throw FormatError(where + ": expected an array");
    Vector v(static_cast<Eigen::Index>(doc.size()));
    for (std::size_t i = 0; i < doc.size(); ++i)
        v(static_cast<Eigen::Index>(i)) = get_as<double>(doc[i], where + "[" + std::to_string(i) + "]");
    return v;
}

}  // namespace detail

inline json mdp_to_json(const Mdp& mdp, const FeatureMap& features) {
    json transition = json::array();
    for (std::size_t s = 0; s < mdp.n_states(); ++s) {
        json per_action = json::array();
        for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
            json row = json::array();
            const auto succ = mdp.successors(s, a);
            for (Eigen::Index j = 0; j < succ.size(); ++j) row.push_back(succ(j));
            per_action.push_back(std::move(row));
        }
        transition.push_back(std::move(per_action));
    }
    json phi = json::array();
    for (Eigen::Index s = 0; s < features.matrix().rows(); ++s)
        phi.push_back(detail::vector_to_json(features.matrix().row(s).transpose()));
    return json{{"n_states", mdp.n_states()},
                {"n_actions", mdp.n_actions()},
                {"discount", mdp.discount()},
                {"transition", std::move(transition)},
                {"features", std::move(phi)}};
}

struct MdpDocument {
    Mdp mdp;
    FeatureMap features;
};

inline MdpDocument mdp_from_json(const json& doc) {
    const std::string where = "mdp";
    const auto n_states = detail::get_as<std::size_t>(detail::field(doc, "n_states", where), "n_states");
    const auto n_actions =
        detail::get_as<std::size_t>(detail::field(doc, "n_actions", where), "n_actions");
    const auto discount = detail::get_as<double>(detail::field(doc, "discount", where), "discount");
    const json& transition = detail::field(doc, "transition", where);
    const json& features = detail::field(doc, "features", where);
    if (n_states == 0 || n_actions == 0)
        throw FormatError("mdp: n_states and n_actions must be positive");
    if (!transition.is_array() || transition.size() != n_states)
        throw FormatError("mdp.transition: expected " + std::to_string(n_states) + " states");

    RowMatrix p(static_cast<Eigen::Index>(n_states * n_actions), static_cast<Eigen::Index>(n_states));
    for (std::size_t s = 0; s < n_states; ++s) {
        const json& per_action = transition[s];
        if (!per_action.is_array() || per_action.size() != n_actions)
            throw FormatError("mdp.transition[" + std::to_string(s) + "]: expected " +
                              std::to_string(n_actions) + " actions");
        for (std::size_t a = 0; a < n_actions; ++a) {
            const std::string at =
                "mdp.transition[" + std::to_string(s) + "][" + std::to_string(a) + "]";
            const Vector row = detail::vector_from_json(per_action[a], at);
            if (static_cast<std::size_t>(row.size()) != n_states)
                throw FormatError(at + ": expected " + std::to_string(n_states) + " entries");
            p.row(static_cast<Eigen::Index>(s * n_actions + a)) = row.transpose();
        }
    }
    if (!features.is_array() || features.size() != n_states)
        throw FormatError("mdp.features: expected " + std::to_string(n_states) + " rows");
    Matrix phi;
    for (std::size_t s = 0; s < n_states; ++s) {
        const Vector row = detail::vector_from_json(features[s], "mdp.features[" + std::to_string(s) + "]");
        if (s == 0) phi.resize(static_cast<Eigen::Index>(n_states), row.size());
        if (row.size() != phi.cols())
            throw FormatError("mdp.features[" + std::to_string(s) + "]: ragged feature rows");
        phi.row(static_cast<Eigen::Index>(s)) = row.transpose();
    }
    try {
        return MdpDocument{Mdp(n_states, n_actions, std::move(p), discount), FeatureMap(std::move(phi))};
    } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("mdp: ") + e.what());
    }
}

inline json truth_to_json(const EnvBundle& bundle, const json& environment) {
    json out{{"true_reward", detail::vector_to_json(bundle.true_reward)},
             {"environment", environment}};
    if (bundle.true_theta) out["true_theta"] = detail::vector_to_json(bundle.true_theta->theta());
    if (!bundle.objects.empty()) {
        json objects = json::array();
        for (const auto& o : bundle.objects)
            objects.push_back({{"cell", o.cell}, {"inner_color", o.inner_color},
                               {"outer_color", o.outer_color}});
        out["objects"] = std::move(objects);
    }
    return out;
}

inline Vector reward_from_json(const json& doc, const char* key) {
    return detail::vector_from_json(detail::field(doc, key, "reward document"), key);
}

inline std::string trajectory_to_line(const Trajectory& t) {
    json line = json::array();
    for (const auto& step : t.steps) line.push_back({step.state, step.action});
    return line.dump();
}

inline Trajectory trajectory_from_line(const std::string& line, std::size_t line_number) {
    const std::string where = "trajectory line " + std::to_string(line_number);
    json doc;
    try {
        doc = json::parse(line);
    } catch (const json::parse_error& e) {
        throw FormatError(where + ": " + e.what());
    }
    if (!doc.is_array()) throw FormatError(where + ": expected an array of [s, a] pairs");
    Trajectory t;
    for (const auto& pair : doc) {
        if (!pair.is_array() || pair.size() != 2)
            throw FormatError(where + ": each step must be [state, action]");
        t.steps.push_back({detail::get_as<std::size_t>(pair[0], where),
                           detail::get_as<std::size_t>(pair[1], where)});
    }
    if (t.steps.empty()) throw FormatError(where + ": empty trajectory");
    return t;
}

inline void write_trajectories(std::ostream& out, const std::vector<Trajectory>& trajectories) {
    for (const auto& t : trajectories) out << trajectory_to_line(t) << '\n';
}

inline std::vector<Trajectory> read_trajectories(std::istream& in) {
    std::vector<Trajectory> out;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        out.push_back(trajectory_from_line(line, number));
    }
    return out;
}

inline json gap_curve_to_json(const std::vector<GapPoint>& curve) {
    json out = json::array();
    for (const auto& p : curve) out.push_back({{"k", p.k}, {"gap", p.gap}});
    return out;
}

inline json eval_report_to_json(const EvalReport& report) {
    json b_sweep = json::array();
    for (const auto& p : report.b_sweep)
        b_sweep.push_back(
            {{"b", p.b}, {"min", p.stats.min}, {"max", p.stats.max}, {"mean", p.stats.mean}});
    return json{{"pearson_corr", report.pearson_corr},
                {"opt_action_prob_min", report.opt_action_prob_min},
                {"opt_action_prob_max", report.opt_action_prob_max},
                {"opt_action_prob_mean", report.opt_action_prob_mean},
                {"gap_curve", gap_curve_to_json(report.gap_curve)},
                {"b_sweep", std::move(b_sweep)},
                {"timing", report.timing}};
}

/// Formats a double for CSV: shortest round-trip form, '.' decimal separator.
inline std::string csv_number(double x) {
    return json(x).dump();
}

/// Comma-separated table with a header row.
class CsvWriter {
public:
    CsvWriter(std::ostream& out, const std::vector<std::string>& header) : out_(out) {
        row(header);
    }

    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
        out_ << '\n';
    }

private:
    std::ostream& out_;
};

}  // namespace bgi
