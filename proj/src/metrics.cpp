#include "mtc/metrics.hpp"

#include "mtc/errors.hpp"
#include "mtc/format.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace mtc {

void MetricsAccumulator::record_vehicle(const VehicleStats& stats, int source) {
    const auto key = std::make_pair(source, stats.vehicle_id);
    if (records_.count(key)) {
        throw ContractViolation("vehicle " + std::to_string(stats.vehicle_id) + " recorded twice");
    }
    VehicleRecord r;
    r.source = source;
    r.vehicle_id = stats.vehicle_id;
    r.od = stats.od;
    r.vehicle_class = stats.vehicle_class;
    r.waiting_s = stats.waiting_clock;
    r.finished = stats.finished;
    r.intersection = stats.first_intersection;
    double best = 0.0;
    for (std::size_t i = 0; i < stats.wait_by_intersection.size(); ++i) {
        const double w = stats.wait_by_intersection[i];
        if (w > 0.0) intersection_totals_[static_cast<int>(i)] += w;
        if (w > best) {
            best = w;
            r.intersection = static_cast<int>(i);
        }
    }
    records_.emplace(key, r);
}

void MetricsAccumulator::merge(const MetricsAccumulator& other) {
    for (const auto& [key, r] : other.records_) {
        if (records_.count(key)) throw ContractViolation("merge: overlapping vehicle records");
    }
    records_.insert(other.records_.begin(), other.records_.end());
    for (const auto& [id, total] : other.intersection_totals_) intersection_totals_[id] += total;
    conflicts_ += other.conflicts_;
    spawned_ += other.spawned_;
}

std::size_t MetricsAccumulator::throughput() const {
    return static_cast<std::size_t>(
        std::count_if(records_.begin(), records_.end(), [](const auto& kv) { return kv.second.finished; }));
}

AverageWait MetricsAccumulator::average_waiting_time(const WaitFilter& filter) const {
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& [key, r] : records_) {
        const bool match = filter.kind == WaitFilter::Kind::All ||
                           (filter.kind == WaitFilter::Kind::ByOd && r.od == filter.od) ||
                           (filter.kind == WaitFilter::Kind::ByIntersection && r.intersection == filter.intersection);
        if (!match) continue;
        total += r.waiting_s;
        ++count;
    }
    if (count == 0) return AverageWait{0.0, 0, true};
    return AverageWait{total / static_cast<double>(count), count, false};
}

MetricsAccumulator collect_metrics(const Simulator& sim, int source) {
    MetricsAccumulator acc;
    for (const VehicleStats& s : sim.all_stats()) acc.record_vehicle(s, source);
    acc.add_conflicts(sim.conflicts());
    acc.add_spawned(sim.spawned());
    return acc;
}

std::size_t SummaryTable::filled_cells() const {
    std::size_t n = 0;
    for (const auto& row : cells) n += static_cast<std::size_t>(std::count_if(row.begin(), row.end(), [](const auto& c) { return c.has_value(); }));
    return n;
}

std::string penetration_label(const std::optional<double>& penetration) {
    return penetration ? format_double(*penetration) : "baseline";
}

SummaryTable summarize(const std::vector<ReportRow>& rows) {
    SummaryTable t;
    std::set<int> experiments;
    std::set<double, std::greater<>> penetrations;
    bool baseline = false;
    for (const ReportRow& r : rows) {
        experiments.insert(r.experiment_id);
        if (r.penetration) {
            penetrations.insert(*r.penetration);
        } else {
            baseline = true;
        }
    }
    t.experiments.assign(experiments.begin(), experiments.end());
    for (double p : penetrations) t.columns.emplace_back(p);
    if (baseline) t.columns.emplace_back(std::nullopt);
    for (int e : t.experiments) {
        std::string label;
        std::vector<std::optional<double>> row;
        for (const auto& col : t.columns) {
            double sum = 0.0;
            std::size_t n = 0;
            for (const ReportRow& r : rows) {
                if (r.experiment_id != e || r.penetration != col) continue;
                sum += r.w_bar_s;
                ++n;
                label = r.od_label;
            }
            row.push_back(n ? std::optional<double>(sum / static_cast<double>(n)) : std::nullopt);
        }
        t.labels.push_back(label);
        t.cells.push_back(std::move(row));
    }
    return t;
}

namespace {

constexpr const char* kHeader = "experiment_id,od_label,penetration,seed,W_bar_s,conflicts,throughput,spawned,episodes";

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::vector<std::string> csv_split(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

template <typename T>
T parse_number(const std::string& s, const std::filesystem::path& path) {
    T value{};
    const auto res = std::from_chars(s.data(), s.data() + s.size(), value);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw IoError(path.string() + ": malformed field '" + s + "'");
    }
    return value;
}

std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    return out;
}

std::filesystem::path sibling(const std::filesystem::path& path, const std::string& suffix) {
    return path.parent_path() / (path.stem().string() + suffix);
}

}  // namespace

void write_report(const std::vector<ReportRow>& rows, const std::filesystem::path& path) {
    {
        auto out = open_out(path);
        out << kHeader << '\n';
        for (const ReportRow& r : rows) {
            out << r.experiment_id << ',' << csv_escape(r.od_label) << ',' << penetration_label(r.penetration) << ','
                << r.seed << ',' << format_double(r.w_bar_s) << ',' << r.conflicts << ',' << r.throughput << ','
                << r.spawned << ',' << r.episodes << '\n';
        }
        if (!out) throw IoError("failed writing " + path.string());
    }

    const SummaryTable t = summarize(rows);
    {
        auto out = open_out(sibling(path, "_summary.csv"));
        out << "experiment_id,od_label";
        for (const auto& c : t.columns) out << ',' << penetration_label(c);
        out << '\n';
        for (std::size_t i = 0; i < t.experiments.size(); ++i) {
            out << t.experiments[i] << ',' << csv_escape(t.labels[i]);
            for (const auto& cell : t.cells[i]) out << ',' << (cell ? format_double(*cell) : "");
            out << '\n';
        }
        if (!out) throw IoError("failed writing summary csv");
    }
    {
        nlohmann::ordered_json doc;
        doc["metric"] = "average_waiting_time_s";
        auto& cols = doc["columns"] = nlohmann::ordered_json::array();
        for (const auto& c : t.columns) cols.push_back(penetration_label(c));
        auto& table = doc["rows"] = nlohmann::ordered_json::array();
        for (std::size_t i = 0; i < t.experiments.size(); ++i) {
            nlohmann::ordered_json row;
            row["experiment_id"] = t.experiments[i];
            row["od_label"] = t.labels[i];
            auto& cells = row["w_bar_s"] = nlohmann::ordered_json::array();
            for (const auto& cell : t.cells[i]) cells.push_back(cell ? nlohmann::ordered_json(*cell) : nlohmann::ordered_json());
            table.push_back(std::move(row));
        }
        auto out = open_out(sibling(path, "_summary.json"));
        out << doc.dump(2) << '\n';
        if (!out) throw IoError("failed writing summary json");
    }
}

std::vector<ReportRow> read_report(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != kHeader) throw IoError(path.string() + ": unexpected header");
    std::vector<ReportRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = csv_split(line);
        if (f.size() != 9) throw IoError(path.string() + ": expected 9 fields");
        ReportRow r;
        r.experiment_id = parse_number<int>(f[0], path);
        r.od_label = f[1];
        if (f[2] != "baseline") r.penetration = parse_number<double>(f[2], path);
        r.seed = parse_number<std::uint64_t>(f[3], path);
        r.w_bar_s = parse_number<double>(f[4], path);
        r.conflicts = parse_number<std::size_t>(f[5], path);
        r.throughput = parse_number<std::size_t>(f[6], path);
        r.spawned = parse_number<std::size_t>(f[7], path);
        r.episodes = parse_number<int>(f[8], path);
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace mtc
