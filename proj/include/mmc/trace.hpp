#pragma once

// Time-stamped channel matrix produced by every simulation run, and its CSV
// form (header row, units row, 9 significant digits).

#include "mmc/params.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mmc {

class TraceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Half-open time interval [begin, end); a sample at `end` belongs to the
/// next segment.
struct Window {
    double begin = 0.0;
    double end = 0.0;
    [[nodiscard]] bool contains(double t) const { return t >= begin - 1e-12 && t < end - 1e-12; }
};

struct Channel {
    std::string name;
    std::string unit;
    std::optional<Quantity> kind;  // per-unit base, when the channel has one
    std::vector<double> values;

    bool operator==(const Channel&) const = default;
};

class TraceLog {
public:
    explicit TraceLog(double dt = 0.0) : dt_(dt) {}

    void add_channel(std::string name, std::string unit, std::optional<Quantity> kind = std::nullopt)
    {
        if (!t_.empty()) throw TraceError("channels must be declared before samples are appended");
        if (find(name) != nullptr) throw TraceError("duplicate channel " + name);
        channels_.push_back({std::move(name), std::move(unit), kind, {}});
    }

    void reserve(std::size_t n)
    {
        t_.reserve(n);
        for (auto& c : channels_) c.values.reserve(n);
    }

    void append(double t, std::span<const double> row)
    {
        if (row.size() != channels_.size()) throw TraceError("row width does not match channel count");
        if (!t_.empty() && !(t > t_.back())) throw TraceError("time must increase strictly");
        t_.push_back(t);
        for (std::size_t i = 0; i < row.size(); ++i) channels_[i].values.push_back(row[i]);
    }

    [[nodiscard]] const std::vector<double>& time() const { return t_; }
    [[nodiscard]] std::size_t size() const { return t_.size(); }
    [[nodiscard]] double dt() const { return dt_; }
    [[nodiscard]] const std::vector<Channel>& channels() const { return channels_; }

    [[nodiscard]] bool has_channel(std::string_view name) const { return find(name) != nullptr; }

    [[nodiscard]] const Channel& channel(std::string_view name) const
    {
        if (const Channel* c = find(name)) return *c;
        throw TraceError("missing channel " + std::string(name));
    }

    [[nodiscard]] const std::vector<double>& values(std::string_view name) const { return channel(name).values; }

    /// Insertion-index range events: the run continues, the trace is flagged.
    void flag_range_violation(double t)
    {
        if (range_violations_ == 0) first_range_violation_ = t;
        ++range_violations_;
    }
    [[nodiscard]] std::size_t range_violations() const { return range_violations_; }
    [[nodiscard]] std::optional<double> first_range_violation() const
    {
        if (range_violations_ == 0) return std::nullopt;
        return first_range_violation_;
    }

    /// Keeps every `factor`-th sample.
    [[nodiscard]] TraceLog decimate(std::size_t factor) const
    {
        if (factor == 0) throw TraceError("decimation factor must be positive");
        TraceLog out(dt_ * static_cast<double>(factor));
        out.channels_ = channels_;
        for (auto& c : out.channels_) c.values.clear();
        for (std::size_t n = 0; n < t_.size(); n += factor) {
            out.t_.push_back(t_[n]);
            for (std::size_t i = 0; i < channels_.size(); ++i) out.channels_[i].values.push_back(channels_[i].values[n]);
        }
        out.range_violations_ = range_violations_;
        out.first_range_violation_ = first_range_violation_;
        return out;
    }

    bool operator==(const TraceLog& o) const { return dt_ == o.dt_ && t_ == o.t_ && channels_ == o.channels_; }

private:
    [[nodiscard]] const Channel* find(std::string_view name) const
    {
        for (const auto& c : channels_)
            if (c.name == name) return &c;
        return nullptr;
    }

    double dt_;
    std::vector<double> t_;
    std::vector<Channel> channels_;
    std::size_t range_violations_ = 0;
    double first_range_violation_ = 0.0;
};

/// Same trace with every channel that has a base divided by it.
inline TraceLog to_per_unit(const TraceLog& tr, const MmcParams& p)
{
    TraceLog out(tr.dt());
    for (const auto& c : tr.channels()) out.add_channel(c.name, c.kind ? "pu" : c.unit, c.kind);
    std::vector<double> row(tr.channels().size());
    for (std::size_t n = 0; n < tr.size(); ++n) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            const auto& c = tr.channels()[i];
            row[i] = c.kind ? to_per_unit(c.values[n], *c.kind, p) : c.values[n];
        }
        out.append(tr.time()[n], row);
    }
    return out;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

inline std::string format_value(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.8e", v);
    return buf;
}

inline void write_csv(std::ostream& out, const TraceLog& tr)
{
    out << "time";
    for (const auto& c : tr.channels()) out << ',' << c.name;
    out << "\ns";
    for (const auto& c : tr.channels()) out << ',' << c.unit;
    out << '\n';
    for (std::size_t n = 0; n < tr.size(); ++n) {
        out << format_value(tr.time()[n]);
        for (const auto& c : tr.channels()) out << ',' << format_value(c.values[n]);
        out << '\n';
    }
}

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line)
{
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) {
        if (!cell.empty() && cell.back() == '\r') cell.pop_back();
        cells.push_back(cell);
    }
    return cells;
}

inline std::optional<Quantity> kind_from_unit(const std::string& unit)
{
    if (unit == "A") return Quantity::Current;
    if (unit == "V") return Quantity::DcVoltage;
    return std::nullopt;
}

}  // namespace detail

inline TraceLog read_csv(std::istream& in)
{
    std::string header, units;
    if (!std::getline(in, header) || !std::getline(in, units)) throw TraceError("trace CSV needs header and units rows");
    const auto names = detail::split_csv(header);
    const auto unit_cells = detail::split_csv(units);
    if (names.empty() || names[0] != "time" || unit_cells.size() != names.size()) {
        throw TraceError("malformed trace CSV header");
    }

    std::vector<double> t;
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = detail::split_csv(line);
        if (cells.size() != names.size()) throw TraceError("trace CSV row has wrong width");
        std::vector<double> row;
        row.reserve(cells.size() - 1);
        try {
            t.push_back(std::stod(cells[0]));
            for (std::size_t i = 1; i < cells.size(); ++i) row.push_back(std::stod(cells[i]));
        } catch (const std::exception&) {
            throw TraceError("trace CSV contains a non-numeric cell");
        }
        rows.push_back(std::move(row));
    }
    const double dt = t.size() > 1 ? (t.back() - t.front()) / static_cast<double>(t.size() - 1) : 0.0;
    TraceLog tr(dt);
    for (std::size_t i = 1; i < names.size(); ++i) {
        tr.add_channel(names[i], unit_cells[i], detail::kind_from_unit(unit_cells[i]));
    }
    for (std::size_t n = 0; n < t.size(); ++n) tr.append(t[n], rows[n]);
    return tr;
}

}  // namespace mmc
