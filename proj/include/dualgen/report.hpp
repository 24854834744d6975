#pragma once

#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dualgen/stats.hpp"

namespace dualgen {

// Metric values print with three decimals; an exact zero prints bare, the
// way published descriptive tables keep a degenerate minimum terse.
inline std::string format_stat(double v) {
    if (v == 0.0) return "0";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

inline std::string significance_symbol(Significance s) {
    switch (s) {
        case Significance::Star: return "*";
        case Significance::DoubleStar: return "**";
        case Significance::None: return "ns";
    }
    return "?";
}

namespace detail {

inline std::string pad_left(const std::string& s, size_t w) {
    return s.size() >= w ? s : std::string(w - s.size(), ' ') + s;
}

inline std::string pad_right(const std::string& s, size_t w) {
    return s.size() >= w ? s : s + std::string(w - s.size(), ' ');
}

} // namespace detail

struct Table1Row {
    std::string dataset;
    std::optional<DescriptiveStats> stats; // empty renders a gap marker
};

// Aligned-text rendering of a descriptive-statistics table, one row per
// dataset: Count, Mean, Mean difference (vs real), Std, Min, Q1, Median,
// Q3, Max, IQR.
inline std::string render_table1(const std::string& metric_label,
                                 const std::vector<Table1Row>& rows) {
    using detail::pad_left;
    using detail::pad_right;
    std::string out = metric_label + "\n";
    out += pad_right("Dataset", 12) + pad_left("Count", 6) + pad_left("Mean", 8) +
           pad_left("MeanDiff", 10) + pad_left("Std", 8) + pad_left("Min", 8) +
           pad_left("Q1", 8) + pad_left("Median", 8) + pad_left("Q3", 8) +
           pad_left("Max", 8) + pad_left("IQR", 8) + "\n";
    for (const auto& row : rows) {
        out += pad_right(row.dataset, 12);
        if (!row.stats) {
            out += " [missing]\n";
            continue;
        }
        const auto& s = *row.stats;
        out += pad_left(std::to_string(s.count), 6);
        out += pad_left(format_stat(s.mean), 8);
        out += pad_left(s.has_mean_difference ? format_stat(s.mean_difference) : "N/A", 10);
        out += pad_left(format_stat(s.std_dev), 8);
        out += pad_left(format_stat(s.min), 8);
        out += pad_left(format_stat(s.q1), 8);
        out += pad_left(format_stat(s.median), 8);
        out += pad_left(format_stat(s.q3), 8);
        out += pad_left(format_stat(s.max), 8);
        out += pad_left(format_stat(s.iqr), 8);
        out += "\n";
    }
    return out;
}

struct Table2Row {
    std::string dataset;
    std::optional<ComparisonResult> result;
};

// Distribution-comparison table: EMD, KS D and the significance class in
// the p-value column. Rows with p inside [0.001, 0.005] are listed under
// the table since the star scheme does not classify them.
inline std::string render_table2(const std::string& metric_label,
                                 const std::vector<Table2Row>& rows) {
    using detail::pad_left;
    using detail::pad_right;
    std::string out = metric_label + "\n";
    out += pad_right("Dataset", 12) + pad_left("EMD", 7) + pad_left("KS D", 7) +
           "  p-value\n";
    std::vector<std::string> gaps;
    for (const auto& row : rows) {
        out += pad_right(row.dataset, 12);
        if (!row.result) {
            out += " [missing]\n";
            continue;
        }
        out += pad_left(format_stat(row.result->emd), 7);
        out += pad_left(format_stat(row.result->ks_d), 7);
        out += "  " + significance_symbol(row.result->significance);
        out += "\n";
        if (row.result->in_unmapped_gap) gaps.push_back(row.dataset);
    }
    if (!gaps.empty()) {
        out += "note: p in [0.001,0.005] (outside both significance classes):";
        for (const auto& g : gaps) out += " " + g;
        out += "\n";
    }
    return out;
}

inline nlohmann::ordered_json descriptive_to_json(const DescriptiveStats& s) {
    nlohmann::ordered_json j{
        {"count", s.count}, {"mean", s.mean},     {"std", s.std_dev}, {"min", s.min},
        {"q1", s.q1},       {"median", s.median}, {"q3", s.q3},       {"max", s.max},
        {"iqr", s.iqr},
    };
    if (s.has_mean_difference) j["mean_difference_vs_reference"] = s.mean_difference;
    return j;
}

inline DescriptiveStats descriptive_from_json(const nlohmann::json& j) {
    DescriptiveStats s;
    s.count = j.at("count").get<size_t>();
    s.mean = j.at("mean").get<double>();
    s.std_dev = j.at("std").get<double>();
    s.min = j.at("min").get<double>();
    s.q1 = j.at("q1").get<double>();
    s.median = j.at("median").get<double>();
    s.q3 = j.at("q3").get<double>();
    s.max = j.at("max").get<double>();
    s.iqr = j.at("iqr").get<double>();
    if (j.contains("mean_difference_vs_reference")) {
        s.has_mean_difference = true;
        s.mean_difference = j.at("mean_difference_vs_reference").get<double>();
    }
    return s;
}

inline nlohmann::ordered_json comparison_to_json(const ComparisonResult& r) {
    return nlohmann::ordered_json{
        {"emd", r.emd},
        {"ks_d", r.ks_d},
        {"p_value", r.p_value},
        {"significance", significance_symbol(r.significance)},
        {"in_unmapped_gap", r.in_unmapped_gap},
    };
}

inline ComparisonResult comparison_from_json(const nlohmann::json& j) {
    ComparisonResult r;
    r.emd = j.at("emd").get<double>();
    r.ks_d = j.at("ks_d").get<double>();
    r.p_value = j.at("p_value").get<double>();
    const auto sym = j.at("significance").get<std::string>();
    r.significance = sym == "*" ? Significance::Star
                   : sym == "**" ? Significance::DoubleStar
                                 : Significance::None;
    r.in_unmapped_gap = j.at("in_unmapped_gap").get<bool>();
    return r;
}

} // namespace dualgen
