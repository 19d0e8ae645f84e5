#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "debm/csv.hpp"
#include "debm/error.hpp"

namespace debm {

enum class Diagnosis { CN, MCI, AD };

/// Whether abnormality raises (INCREASING) or lowers (DECREASING) the raw
/// biomarker value. Internally every DECREASING biomarker is sign-flipped at
/// load so that downstream code can assume abnormal = larger.
enum class Direction { INCREASING, DECREASING };

inline const char* to_string(Diagnosis d) {
    switch (d) {
        case Diagnosis::CN: return "CN";
        case Diagnosis::MCI: return "MCI";
        case Diagnosis::AD: return "AD";
    }
    return "?";
}

inline Diagnosis parse_diagnosis(const std::string& s) {
    if (s == "CN") return Diagnosis::CN;
    if (s == "MCI") return Diagnosis::MCI;
    if (s == "AD") return Diagnosis::AD;
    throw LoadError("unknown diagnosis label: '" + s + "'");
}

struct Subject {
    std::string id;
    Diagnosis diagnosis = Diagnosis::CN;
    std::optional<int> group;       // [1, G] when present
    std::vector<double> values;     // sign-normalized; NaN where missing
    std::vector<uint8_t> missing;   // 1 where the value is absent
};

/// Cross-sectional cohort: M subjects x N biomarkers with diagnosis labels,
/// optional group assignments and a missing-value mask. Values are stored
/// sign-normalized; `directions` records the applied per-biomarker flips so
/// the original units can be reconstructed on write.
struct BiomarkerDataset {
    std::vector<Subject> subjects;
    std::vector<std::string> biomarker_names;
    std::vector<Direction> directions;

    size_t n_subjects() const { return subjects.size(); }
    size_t n_biomarkers() const { return biomarker_names.size(); }

    bool has_groups() const {
        return !subjects.empty() &&
               std::all_of(subjects.begin(), subjects.end(),
                           [](const Subject& s) { return s.group.has_value(); });
    }
};

/// Column-name mapping for load_csv. An empty `biomarker_cols` means "every
/// column that is not subject/diagnosis/group is a biomarker".
struct CsvSchema {
    std::string subject_col = "subject_id";
    std::string diagnosis_col = "diagnosis";
    std::string group_col = "group";
    std::vector<std::string> biomarker_cols;
};

struct LoadOptions {
    /// Per-biomarker direction overrides (by column name). Biomarkers not
    /// named here get the CN/AD-mean inference.
    std::map<std::string, Direction> direction_override;
    /// When false, skips the >=2 CN / >=2 AD per-biomarker check and the
    /// direction inference; every biomarker must then be covered by
    /// direction_override. Used when loading a staging set against an
    /// already-fitted model.
    bool require_cn_ad = true;
};

namespace detail {

inline bool is_missing_token(const std::string& t) {
    return t.empty() || t == "NA" || t == "NaN";
}

inline double parse_value(const std::string& t, size_t row, const std::string& col) {
    char* end = nullptr;
    const std::string s = csv::trim(t);
    double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0')
        throw LoadError("row " + std::to_string(row) + ", column '" + col +
                        "': not a number: '" + t + "'");
    if (!std::isfinite(v))
        throw LoadError("row " + std::to_string(row) + ", column '" + col +
                        "': non-finite value");
    return v;
}

} // namespace detail

/// Direction of biomarker i from the dataset's current values: INCREASING
/// when the AD mean exceeds the CN mean, DECREASING otherwise; exact ties
/// break as INCREASING.
inline Direction infer_direction(const BiomarkerDataset& ds, size_t i) {
    double cn_sum = 0, ad_sum = 0;
    size_t cn_n = 0, ad_n = 0;
    for (const Subject& s : ds.subjects) {
        if (s.missing[i]) continue;
        if (s.diagnosis == Diagnosis::CN) {
            cn_sum += s.values[i];
            ++cn_n;
        } else if (s.diagnosis == Diagnosis::AD) {
            ad_sum += s.values[i];
            ++ad_n;
        }
    }
    if (cn_n == 0 || ad_n == 0)
        throw ValidationError("biomarker '" + ds.biomarker_names[i] +
                              "': cannot infer direction without CN and AD values");
    return (ad_sum / ad_n >= cn_sum / cn_n) ? Direction::INCREASING
                                            : Direction::DECREASING;
}

/// Checks the structural invariants: M >= 1, N >= 1, equal row widths,
/// finite values, and (unless relaxed) >=2 non-missing CN and AD values per
/// biomarker as required by the mixture initialization.
inline void validate(const BiomarkerDataset& ds, bool require_cn_ad = true) {
    if (ds.subjects.empty()) throw ValidationError("dataset has no subjects");
    if (ds.biomarker_names.empty()) throw ValidationError("dataset has no biomarkers");
    const size_t n = ds.n_biomarkers();
    if (ds.directions.size() != n)
        throw ValidationError("directions not assigned for every biomarker");
    for (const Subject& s : ds.subjects) {
        if (s.values.size() != n || s.missing.size() != n)
            throw ValidationError("subject '" + s.id + "': row width mismatch");
        for (size_t i = 0; i < n; ++i)
            if (!s.missing[i] && !std::isfinite(s.values[i]))
                throw ValidationError("subject '" + s.id + "': non-finite value");
    }
    if (!require_cn_ad) return;
    for (size_t i = 0; i < n; ++i) {
        size_t cn = 0, ad = 0;
        for (const Subject& s : ds.subjects) {
            if (s.missing[i]) continue;
            if (s.diagnosis == Diagnosis::CN) ++cn;
            if (s.diagnosis == Diagnosis::AD) ++ad;
        }
        if (cn < 2 || ad < 2)
            throw ValidationError("biomarker '" + ds.biomarker_names[i] +
                                  "': needs >=2 non-missing CN and AD values (has " +
                                  std::to_string(cn) + " CN, " + std::to_string(ad) +
                                  " AD)");
    }
}

/// Loads a cohort CSV (UTF-8, header row required). Empty cells and the
/// sentinels "NA"/"NaN" become missing-mask entries. DECREASING biomarkers
/// are sign-flipped in the returned dataset.
inline BiomarkerDataset load_csv(const std::string& path,
                                 const CsvSchema& schema = {},
                                 const LoadOptions& options = {}) {
    const auto lines = csv::read_lines(path);
    if (lines.empty()) throw LoadError(path + ": empty file (header row required)");

    const auto header = csv::split_record(lines[0]);
    std::map<std::string, size_t> col_index;
    for (size_t c = 0; c < header.size(); ++c) {
        const std::string name = csv::trim(header[c]);
        if (col_index.count(name))
            throw LoadError(path + ": duplicate column '" + name + "'");
        col_index[name] = c;
    }

    auto find_col = [&](const std::string& name) -> std::optional<size_t> {
        auto it = col_index.find(name);
        if (it == col_index.end()) return std::nullopt;
        return it->second;
    };

    const auto diag_col = find_col(schema.diagnosis_col);
    if (!diag_col)
        throw LoadError(path + ": required diagnosis column '" +
                        schema.diagnosis_col + "' not found");
    const auto subj_col = find_col(schema.subject_col);
    const auto group_col = find_col(schema.group_col);

    BiomarkerDataset ds;
    std::vector<size_t> bio_cols;
    if (schema.biomarker_cols.empty()) {
        for (size_t c = 0; c < header.size(); ++c) {
            const std::string name = csv::trim(header[c]);
            if (c == *diag_col) continue;
            if (subj_col && c == *subj_col) continue;
            if (group_col && c == *group_col) continue;
            bio_cols.push_back(c);
            ds.biomarker_names.push_back(name);
        }
    } else {
        for (const std::string& name : schema.biomarker_cols) {
            const auto c = find_col(name);
            if (!c) throw LoadError(path + ": biomarker column '" + name + "' not found");
            bio_cols.push_back(*c);
            ds.biomarker_names.push_back(name);
        }
    }
    if (bio_cols.empty())
        throw LoadError(path + ": no biomarker columns");

    const size_t n = bio_cols.size();
    for (size_t li = 1; li < lines.size(); ++li) {
        if (csv::trim(lines[li]).empty()) continue;
        const auto fields = csv::split_record(lines[li]);
        const size_t row = li + 1; // 1-based, counting the header
        if (fields.size() != header.size())
            throw LoadError(path + ": row " + std::to_string(row) + ": expected " +
                            std::to_string(header.size()) + " fields, got " +
                            std::to_string(fields.size()));
        Subject s;
        s.id = subj_col ? csv::trim(fields[*subj_col])
                        : "row" + std::to_string(row);
        try {
            s.diagnosis = parse_diagnosis(csv::trim(fields[*diag_col]));
        } catch (const LoadError& e) {
            throw LoadError(path + ": row " + std::to_string(row) + ": " + e.what());
        }
        if (group_col) {
            const std::string g = csv::trim(fields[*group_col]);
            if (!g.empty()) {
                char* end = nullptr;
                long v = std::strtol(g.c_str(), &end, 10);
                if (end == g.c_str() || *end != '\0' || v < 1)
                    throw LoadError(path + ": row " + std::to_string(row) +
                                    ": group must be a positive integer, got '" + g + "'");
                s.group = static_cast<int>(v);
            }
        }
        s.values.resize(n);
        s.missing.resize(n);
        for (size_t i = 0; i < n; ++i) {
            const std::string cell = csv::trim(fields[bio_cols[i]]);
            if (detail::is_missing_token(cell)) {
                s.missing[i] = 1;
                s.values[i] = std::numeric_limits<double>::quiet_NaN();
            } else {
                s.missing[i] = 0;
                s.values[i] = detail::parse_value(cell, row, ds.biomarker_names[i]);
            }
        }
        ds.subjects.push_back(std::move(s));
    }

    ds.directions.assign(n, Direction::INCREASING);
    validate(ds, options.require_cn_ad);

    for (size_t i = 0; i < n; ++i) {
        auto it = options.direction_override.find(ds.biomarker_names[i]);
        if (it != options.direction_override.end()) {
            ds.directions[i] = it->second;
        } else if (options.require_cn_ad) {
            ds.directions[i] = infer_direction(ds, i);
        } else {
            throw ValidationError("biomarker '" + ds.biomarker_names[i] +
                                  "': no direction given and inference disabled");
        }
    }
    // normalize: flip DECREASING biomarkers so abnormal = larger everywhere
    for (Subject& s : ds.subjects)
        for (size_t i = 0; i < n; ++i)
            if (!s.missing[i] && ds.directions[i] == Direction::DECREASING)
                s.values[i] = -s.values[i];
    return ds;
}

/// Writes a dataset back to CSV in original units (DECREASING biomarkers are
/// un-flipped). Values are rendered with 12 significant digits; missing
/// cells are empty.
inline void write_csv(const BiomarkerDataset& ds, const std::string& path) {
    std::string out;
    const bool groups = std::any_of(ds.subjects.begin(), ds.subjects.end(),
                                    [](const Subject& s) { return s.group.has_value(); });
    out += "subject_id,diagnosis";
    if (groups) out += ",group";
    for (const auto& name : ds.biomarker_names) out += "," + csv::quote_if_needed(name);
    out += "\n";
    for (const Subject& s : ds.subjects) {
        out += csv::quote_if_needed(s.id);
        out += ",";
        out += to_string(s.diagnosis);
        if (groups) {
            out += ",";
            if (s.group) out += std::to_string(*s.group);
        }
        for (size_t i = 0; i < ds.n_biomarkers(); ++i) {
            out += ",";
            if (!s.missing[i]) {
                double v = s.values[i];
                if (ds.directions[i] == Direction::DECREASING) v = -v;
                out += csv::format_double(v, 12);
            }
        }
        out += "\n";
    }
    csv::write_file(path, out);
}

/// Partitions the dataset by group id (ascending). Row order within each
/// group is preserved; names and directions are shared.
inline std::vector<std::pair<int, BiomarkerDataset>>
split_groups(const BiomarkerDataset& ds) {
    std::map<int, BiomarkerDataset> by_group;
    for (const Subject& s : ds.subjects) {
        if (!s.group)
            throw ValidationError("subject '" + s.id + "' has no group id");
        auto& g = by_group[*s.group];
        if (g.biomarker_names.empty()) {
            g.biomarker_names = ds.biomarker_names;
            g.directions = ds.directions;
        }
        g.subjects.push_back(s);
    }
    std::vector<std::pair<int, BiomarkerDataset>> out;
    out.reserve(by_group.size());
    for (auto& [id, g] : by_group) out.emplace_back(id, std::move(g));
    return out;
}

} // namespace debm
