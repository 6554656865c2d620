#pragma once

#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lshift/error.hpp"

namespace lshift {

enum class Role { training, validation, test };

inline const char* to_string(Role r)
{
    switch (r) {
    case Role::training: return "training";
    case Role::validation: return "validation";
    case Role::test: return "test";
    }
    return "?";
}

/// One event: classifier features z, optional feature of interest x,
/// optional binary label y, condition c and group k.
struct Record {
    std::vector<double> z;
    std::optional<double> x;
    std::optional<int> y;
    std::string c;
    std::string k;
};

/// Column names used when reading a CSV. An empty `z` list means "every
/// header named z1, z2, ... in numeric order".
struct Schema {
    std::string c = "c";
    std::string k = "k";
    std::string y = "y";
    std::string x = "x";
    std::vector<std::string> z;
};

/// Validated, immutable, column-oriented collection of records.
///
/// Conditions and groups are interned in order of first appearance. Every
/// group belongs to exactly one condition. A dataset is either fully
/// labeled or fully unlabeled; training datasets must be labeled.
class Dataset {
  public:
    static Dataset from_records(const std::vector<Record>& records, Role role)
    {
        detail::require(!records.empty(), "empty dataset");
        Dataset d;
        d.role_ = role;
        d.dim_ = records.front().z.size();
        detail::require(d.dim_ > 0, "records need at least one feature");
        const bool labeled = records.front().y.has_value();
        const std::size_t n = records.size();
        d.z_.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d.dim_));
        d.x_.assign(n, std::numeric_limits<double>::quiet_NaN());
        d.cond_.resize(n);
        d.group_.resize(n);
        if (labeled) d.y_.resize(n);

        std::unordered_map<std::string, std::size_t> cond_ids;
        std::unordered_map<std::string, std::size_t> group_ids;
        for (std::size_t i = 0; i < n; ++i) {
            const Record& r = records[i];
            detail::require(r.z.size() == d.dim_, "feature dimension mismatch at row " + std::to_string(i));
            for (std::size_t j = 0; j < d.dim_; ++j) {
                detail::require(std::isfinite(r.z[j]), "non-finite feature at row " + std::to_string(i));
                d.z_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = r.z[j];
            }
            detail::require(r.y.has_value() == labeled, "dataset mixes labeled and unlabeled records");
            if (labeled) {
                detail::require(*r.y == 0 || *r.y == 1, "non-binary label");
                d.y_[i] = *r.y;
            }
            if (r.x) {
                detail::require(std::isfinite(*r.x), "non-finite x at row " + std::to_string(i));
                d.x_[i] = *r.x;
            }
            auto [cit, cnew] = cond_ids.try_emplace(r.c, d.conditions_.size());
            if (cnew) d.conditions_.push_back(r.c);
            auto [git, gnew] = group_ids.try_emplace(r.k, d.groups_.size());
            if (gnew) {
                d.groups_.push_back(r.k);
                d.group_cond_.push_back(cit->second);
            } else {
                detail::require(d.group_cond_[git->second] == cit->second, "group nested in two conditions: " + r.k);
            }
            d.cond_[i] = cit->second;
            d.group_[i] = git->second;
        }
        detail::require(role != Role::training || labeled, "training role requires labels");
        return d;
    }

    std::size_t size() const { return cond_.size(); }
    std::size_t dim() const { return dim_; }
    Role role() const { return role_; }
    bool labeled() const { return !y_.empty(); }

    const Eigen::MatrixXd& features() const { return z_; }
    const std::vector<double>& x() const { return x_; }
    bool has_x(std::size_t i) const { return !std::isnan(x_[i]); }
    bool all_x() const
    {
        for (double v : x_)
            if (std::isnan(v)) return false;
        return true;
    }
    const std::vector<int>& labels() const { return y_; }

    const std::vector<std::size_t>& condition_index() const { return cond_; }
    const std::vector<std::size_t>& group_index() const { return group_; }
    const std::vector<std::string>& conditions() const { return conditions_; }
    const std::vector<std::string>& groups() const { return groups_; }
    /// Condition index of group g.
    std::size_t group_condition(std::size_t g) const { return group_cond_[g]; }

    std::optional<std::size_t> find_condition(const std::string& name) const { return find(conditions_, name); }
    std::optional<std::size_t> find_group(const std::string& name) const { return find(groups_, name); }

    Record record(std::size_t i) const
    {
        Record r;
        r.z.resize(dim_);
        for (std::size_t j = 0; j < dim_; ++j) r.z[j] = z_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        if (has_x(i)) r.x = x_[i];
        if (labeled()) r.y = y_[i];
        r.c = conditions_[cond_[i]];
        r.k = groups_[group_[i]];
        return r;
    }

    Dataset subset(std::span<const std::size_t> rows, Role role) const
    {
        std::vector<Record> out;
        out.reserve(rows.size());
        for (std::size_t i : rows) out.push_back(record(i));
        return from_records(out, role);
    }

    std::size_t condition_count(std::size_t c) const
    {
        std::size_t n = 0;
        for (std::size_t v : cond_) n += (v == c);
        return n;
    }

  private:
    static std::optional<std::size_t> find(const std::vector<std::string>& names, const std::string& name)
    {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return i;
        return std::nullopt;
    }

    Role role_ = Role::test;
    std::size_t dim_ = 0;
    Eigen::MatrixXd z_;
    std::vector<double> x_;
    std::vector<int> y_;
    std::vector<std::size_t> cond_;
    std::vector<std::size_t> group_;
    std::vector<std::string> conditions_;
    std::vector<std::string> groups_;
    std::vector<std::size_t> group_cond_;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += ch;
        }
    }
    out.push_back(std::move(cur));
    return out;
}

inline std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline double parse_number(const std::string& s, std::size_t row, const std::string& column)
{
    std::size_t used = 0;
    double v = 0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != s.size())
        throw ValidationError("invalid number '" + s + "' in column " + column + " at row " + std::to_string(row));
    return v;
}

/// Feature columns named z1..zd, ordered by their numeric suffix.
inline std::vector<std::string> default_feature_columns(const std::vector<std::string>& header)
{
    std::map<int, std::string> found;
    for (const auto& h : header) {
        if (h.size() < 2 || h[0] != 'z') continue;
        bool digits = true;
        for (std::size_t i = 1; i < h.size(); ++i) digits = digits && std::isdigit(static_cast<unsigned char>(h[i]));
        if (digits) found.emplace(std::stoi(h.substr(1)), h);
    }
    std::vector<std::string> out;
    for (auto& [_, name] : found) out.push_back(name);
    return out;
}

} // namespace detail

/// Read a CSV with a header row into a validated dataset. Row order is kept.
///
/// The label column is optional: when it is absent the dataset is
/// unlabeled (an error for the training role). An empty x cell means
/// "x missing" for that row.
inline Dataset load_dataset(const std::string& path, const Schema& schema, Role role)
{
    std::ifstream in(path);
    detail::require(in.good(), "cannot open file: " + path);
    std::string line;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        if (!detail::trim(line).empty()) {
            header = detail::split_csv_line(line);
            break;
        }
    }
    detail::require(!header.empty(), "empty file: " + path);
    for (auto& h : header) h = detail::trim(h);

    auto column = [&](const std::string& name) -> std::optional<std::size_t> {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        return std::nullopt;
    };
    const auto c_col = column(schema.c);
    detail::require(c_col.has_value(), "missing column '" + schema.c + "'");
    const auto k_col = column(schema.k);
    detail::require(k_col.has_value(), "missing column '" + schema.k + "'");
    const auto y_col = schema.y.empty() ? std::nullopt : column(schema.y);
    const auto x_col = schema.x.empty() ? std::nullopt : column(schema.x);
    const std::vector<std::string> z_names = schema.z.empty() ? detail::default_feature_columns(header) : schema.z;
    detail::require(!z_names.empty(), "missing feature columns");
    std::vector<std::size_t> z_cols;
    for (const auto& name : z_names) {
        const auto col = column(name);
        detail::require(col.has_value(), "missing feature columns: '" + name + "'");
        z_cols.push_back(*col);
    }
    detail::require(role != Role::training || y_col.has_value(), "missing column '" + schema.y + "' (training role requires labels)");

    std::vector<Record> records;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (detail::trim(line).empty()) continue;
        ++row;
        auto cells = detail::split_csv_line(line);
        for (auto& cell : cells) cell = detail::trim(cell);
        detail::require(cells.size() == header.size(), "row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                                                           " fields, header has " + std::to_string(header.size()));
        Record r;
        r.c = cells[*c_col];
        r.k = cells[*k_col];
        detail::require(!r.c.empty() && !r.k.empty(), "empty condition or group id at row " + std::to_string(row));
        for (std::size_t j = 0; j < z_cols.size(); ++j) {
            const auto& cell = cells[z_cols[j]];
            detail::require(!cell.empty(), "missing feature value in column " + z_names[j] + " at row " + std::to_string(row));
            r.z.push_back(detail::parse_number(cell, row, z_names[j]));
        }
        if (x_col && !cells[*x_col].empty()) r.x = detail::parse_number(cells[*x_col], row, schema.x);
        if (y_col) {
            const auto& cell = cells[*y_col];
            if (cell == "0" || cell == "1") r.y = cell == "1" ? 1 : 0;
            else throw ValidationError("non-binary label '" + cell + "' at row " + std::to_string(row));
        }
        records.push_back(std::move(r));
    }
    detail::require(!records.empty(), "empty file: " + path);
    return Dataset::from_records(records, role);
}

/// Partition by group membership: (rows outside holdout, rows inside holdout).
inline std::pair<Dataset, Dataset> split_by_group(const Dataset& data, const std::set<std::string>& holdout_groups)
{
    std::vector<bool> held(data.groups().size(), false);
    for (const auto& g : holdout_groups) {
        const auto id = data.find_group(g);
        detail::require(id.has_value(), "unknown group id: " + g);
        held[*id] = true;
    }
    std::vector<std::size_t> keep, hold;
    for (std::size_t i = 0; i < data.size(); ++i) (held[data.group_index()[i]] ? hold : keep).push_back(i);
    detail::require(!keep.empty(), "empty training split");
    detail::require(!hold.empty(), "empty holdout split");
    const Role hold_role = data.role() == Role::training ? Role::validation : data.role();
    return {data.subset(keep, data.role()), data.subset(hold, hold_role)};
}

/// Fraction of y = 1 among records in condition c.
inline double condition_prevalence(const Dataset& data, const std::string& c)
{
    detail::require(data.labeled(), "condition_prevalence needs a labeled dataset");
    const auto id = data.find_condition(c);
    detail::require(id.has_value(), "unknown condition: " + c);
    std::size_t n = 0, pos = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (data.condition_index()[i] != *id) continue;
        ++n;
        pos += static_cast<std::size_t>(data.labels()[i]);
    }
    return static_cast<double>(pos) / static_cast<double>(n);
}

/// Write a dataset back out as CSV using the default column names.
inline void write_dataset_csv(std::ostream& out, const Dataset& data, const std::string& label_column = "y")
{
    out << "c,k";
    if (data.labeled()) out << ',' << label_column;
    out << ",x";
    for (std::size_t j = 0; j < data.dim(); ++j) out << ",z" << (j + 1);
    out << '\n';
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return buf;
    };
    for (std::size_t i = 0; i < data.size(); ++i) {
        out << data.conditions()[data.condition_index()[i]] << ',' << data.groups()[data.group_index()[i]];
        if (data.labeled()) out << ',' << data.labels()[i];
        out << ',';
        if (data.has_x(i)) out << num(data.x()[i]);
        for (std::size_t j = 0; j < data.dim(); ++j)
            out << ',' << num(data.features()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
        out << '\n';
    }
}

} // namespace lshift
