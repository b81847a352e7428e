#include "evomd/frames.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "json.hpp"

#include "evomd/errors.hpp"
#include "evomd/formula.hpp"
#include "evomd/jsonl.hpp"

namespace evomd {

using nlohmann::json;

void apply_threshold(Frame& frame, BondThreshold threshold) {
    std::erase_if(frame.bonds, [&](const Bond& b) { return !(b.bond_order > threshold.bo_min); });
}

namespace {

struct TrajectoryState {
    std::int64_t last_time = 0;
    std::int64_t interval = 0;  // 0 = not yet known
    bool seen = false;
};

Frame frame_from_json(const json& j, const std::string& where) {
    if (!j.is_object() || !j.contains("trajectory_id") || !j.contains("time_ps") ||
        !j.contains("elements") || !j.contains("bonds"))
        throw ValidationError(where + ": malformed record: expected trajectory_id/time_ps/elements/bonds");

    Frame f;
    if (!j["trajectory_id"].is_string())
        throw ValidationError(where + ": malformed record: trajectory_id must be a string");
    f.trajectory_id = j["trajectory_id"].get<std::string>();
    if (f.trajectory_id.empty())
        throw ValidationError(where + ": malformed record: empty trajectory_id");

    if (!j["time_ps"].is_number_integer() || j["time_ps"].get<std::int64_t>() < 0)
        throw ValidationError(where + ": malformed record: time_ps must be a non-negative integer");
    f.time_ps = j["time_ps"].get<std::int64_t>();

    if (!j["elements"].is_array())
        throw ValidationError(where + ": malformed record: elements must be an array");
    for (const auto& e : j["elements"]) {
        if (!e.is_string() || !is_element_symbol(e.get<std::string>()))
            throw ValidationError(where + ": malformed record: invalid element symbol " + e.dump());
        f.elements.push_back(e.get<std::string>());
    }

    const int n = static_cast<int>(f.elements.size());
    std::set<std::pair<int, int>> seen_pairs;
    if (!j["bonds"].is_array())
        throw ValidationError(where + ": malformed record: bonds must be an array");
    for (const auto& b : j["bonds"]) {
        if (!b.is_array() || b.size() != 3 || !b[0].is_number_integer() || !b[1].is_number_integer() ||
            !b[2].is_number())
            throw ValidationError(where + ": malformed record: bond must be [i, j, bond_order]");
        Bond bond{b[0].get<int>(), b[1].get<int>(), b[2].get<double>()};
        if (bond.i == bond.j)
            throw ValidationError(where + ": malformed record: self bond on atom " + std::to_string(bond.i));
        if (bond.i < 0 || bond.i >= n || bond.j < 0 || bond.j >= n)
            throw ValidationError(where + ": dangling bond index in frame (trajectory " + f.trajectory_id +
                                  ", t=" + std::to_string(f.time_ps) + " ps)");
        if (!(bond.bond_order >= 0.0) || !std::isfinite(bond.bond_order))
            throw ValidationError(where + ": malformed record: bond_order must be a finite non-negative number");
        auto key = std::minmax(bond.i, bond.j);
        if (!seen_pairs.insert(key).second)
            throw ValidationError(where + ": malformed record: duplicate bond pair (" +
                                  std::to_string(key.first) + "," + std::to_string(key.second) + ")");
        f.bonds.push_back(bond);
    }
    return f;
}

}  // namespace

struct FrameReader::Impl {
    JsonlReader reader;
    BondThreshold threshold;
    std::map<std::string, TrajectoryState> states;
    std::map<std::string, std::int64_t> intervals;

    Impl(const std::filesystem::path& path, BondThreshold t) : reader(path), threshold(t) {
        if (!(t.bo_min > 0.0))
            throw ValidationError("bo_min must be positive, got " + std::to_string(t.bo_min));
    }
};

FrameReader::FrameReader(const std::filesystem::path& path, BondThreshold threshold)
    : impl_(std::make_unique<Impl>(path, threshold)) {}

FrameReader::~FrameReader() = default;
FrameReader::FrameReader(FrameReader&&) noexcept = default;

std::optional<Frame> FrameReader::next() {
    json j;
    if (!impl_->reader.next(j)) return std::nullopt;
    Frame f = frame_from_json(j, impl_->reader.location());

    auto& st = impl_->states[f.trajectory_id];
    if (st.seen) {
        if (f.time_ps <= st.last_time)
            throw ValidationError("trajectory " + f.trajectory_id + ": non-monotone time_ps at " +
                                  impl_->reader.location());
        const std::int64_t gap = f.time_ps - st.last_time;
        if (st.interval == 0) {
            st.interval = gap;
            impl_->intervals[f.trajectory_id] = gap;
        } else if (gap != st.interval) {
            throw ValidationError("trajectory " + f.trajectory_id + ": non-constant frame interval (" +
                                  std::to_string(st.interval) + " ps vs " + std::to_string(gap) + " ps) at " +
                                  impl_->reader.location());
        }
    }
    st.seen = true;
    st.last_time = f.time_ps;

    apply_threshold(f, impl_->threshold);
    return f;
}

const std::map<std::string, std::int64_t>& FrameReader::intervals() const { return impl_->intervals; }

void write_frame(std::ostream& out, const Frame& frame) {
    json bonds = json::array();
    for (const auto& b : frame.bonds) bonds.push_back(json::array({b.i, b.j, b.bond_order}));
    json j{{"trajectory_id", frame.trajectory_id},
           {"time_ps", frame.time_ps},
           {"elements", frame.elements},
           {"bonds", bonds}};
    out << j.dump() << '\n';
}

std::vector<Frame> read_frames(const std::filesystem::path& path, BondThreshold threshold) {
    FrameReader reader(path, threshold);
    std::vector<Frame> frames;
    while (auto f = reader.next()) frames.push_back(std::move(*f));
    return frames;
}

TrajectoryManifest validate_trajectory(const std::vector<Frame>& frames) {
    if (frames.empty()) throw ValidationError("validate_trajectory: empty frame list");
    const std::string& id = frames.front().trajectory_id;
    for (const auto& f : frames)
        if (f.trajectory_id != id)
            throw ValidationError("validate_trajectory: mixed trajectory ids (" + id + " vs " + f.trajectory_id + ")");
    if (frames.size() < 2)
        throw ValidationError("trajectory " + id + ": at least 2 frames required to determine the interval");

    const std::int64_t interval = frames[1].time_ps - frames[0].time_ps;
    if (interval <= 0) throw ValidationError("trajectory " + id + ": non-monotone time_ps");
    const std::int64_t atoms = static_cast<std::int64_t>(frames.front().elements.size());
    for (std::size_t k = 1; k < frames.size(); ++k) {
        if (frames[k].time_ps - frames[k - 1].time_ps != interval)
            throw ValidationError("trajectory " + id + ": non-constant interval at t=" +
                                  std::to_string(frames[k].time_ps) + " ps");
        if (static_cast<std::int64_t>(frames[k].elements.size()) != atoms)
            throw ValidationError("trajectory " + id + ": atom count changes at t=" +
                                  std::to_string(frames[k].time_ps) +
                                  " ps (atom creation/destruction unsupported)");
    }
    return TrajectoryManifest{id, static_cast<std::int64_t>(frames.size()), interval, atoms};
}

}  // namespace evomd
