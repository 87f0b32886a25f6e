#pragma once

#include "mtc/demand.hpp"
#include "mtc/sim.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace mtc {

struct VehicleRecord {
    int source = 0;  // evaluation run the vehicle belongs to
    int vehicle_id = 0;
    OdPair od = OdPair::NS;
    VehicleClass vehicle_class = VehicleClass::HV;
    double waiting_s = 0.0;
    /// Intersection where the vehicle waited longest (lowest id on ties, the
    /// first intersection on its route when it never waited). Each vehicle is
    /// attributed to exactly one intersection.
    int intersection = -1;
    bool finished = false;
};

struct WaitFilter {
    enum class Kind { All, ByOd, ByIntersection };
    Kind kind = Kind::All;
    OdPair od = OdPair::NS;
    int intersection = -1;

    static WaitFilter all() { return {}; }
    static WaitFilter by_od(OdPair od) { return {Kind::ByOd, od, -1}; }
    static WaitFilter by_intersection(int id) { return {Kind::ByIntersection, OdPair::NS, id}; }
};

struct AverageWait {
    double seconds = 0.0;
    std::size_t count = 0;
    bool empty = true;
};

class MetricsAccumulator {
public:
    /// Throws ContractViolation when (source, vehicle id) was already recorded.
    void record_vehicle(const VehicleStats& stats, int source = 0);
    void add_conflicts(std::size_t n) { conflicts_ += n; }
    void add_spawned(std::size_t n) { spawned_ += n; }

    /// Associative and commutative; throws on overlapping (source, vehicle) keys.
    void merge(const MetricsAccumulator& other);

    AverageWait average_waiting_time(const WaitFilter& filter = WaitFilter::all()) const;

    std::size_t vehicles() const { return records_.size(); }
    std::size_t conflicts() const { return conflicts_; }
    std::size_t spawned() const { return spawned_; }
    std::size_t throughput() const;
    /// Total stationary seconds accumulated inside each intersection's zone.
    const std::map<int, double>& intersection_totals() const { return intersection_totals_; }
    const std::map<std::pair<int, int>, VehicleRecord>& records() const { return records_; }

private:
    std::map<std::pair<int, int>, VehicleRecord> records_;
    std::map<int, double> intersection_totals_;
    std::size_t conflicts_ = 0;
    std::size_t spawned_ = 0;
};

/// Records every vehicle the simulator has seen (finished and still active).
MetricsAccumulator collect_metrics(const Simulator& sim, int source = 0);

struct ReportRow {
    int experiment_id = 0;
    std::string od_label;
    std::optional<double> penetration;  // nullopt for the all-signalized baseline
    std::uint64_t seed = 0;
    double w_bar_s = 0.0;
    std::size_t conflicts = 0;
    std::size_t throughput = 0;
    std::size_t spawned = 0;
    int episodes = 0;

    friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

/// Table-shaped summary: experiments x (penetrations, descending, then baseline).
struct SummaryTable {
    std::vector<int> experiments;
    std::vector<std::string> labels;
    std::vector<std::optional<double>> columns;
    /// cells[row][col] = mean W_bar over the matching rows, nullopt if none.
    std::vector<std::vector<std::optional<double>>> cells;

    std::size_t filled_cells() const;
};

SummaryTable summarize(const std::vector<ReportRow>& rows);

std::string penetration_label(const std::optional<double>& penetration);

/// Writes `path` (one CSV row per run) plus `<stem>_summary.csv` and
/// `<stem>_summary.json` beside it. Throws IoError when unwritable.
void write_report(const std::vector<ReportRow>& rows, const std::filesystem::path& path);
std::vector<ReportRow> read_report(const std::filesystem::path& path);

}  // namespace mtc
