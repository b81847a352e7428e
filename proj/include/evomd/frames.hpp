#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace evomd {

struct Bond {
    int i = 0;
    int j = 0;
    double bond_order = 0.0;

    bool operator==(const Bond&) const = default;
};

// One connectivity snapshot. Atom index = position in `elements`.
struct Frame {
    std::string trajectory_id;
    std::int64_t time_ps = 0;
    std::vector<std::string> elements;
    std::vector<Bond> bonds;

    bool operator==(const Frame&) const = default;
};

// Pairs are bonded only when bond_order > bo_min (strict inequality).
// bo_min must be positive.
struct BondThreshold {
    double bo_min = 0.5;
};

struct TrajectoryManifest {
    std::string trajectory_id;
    std::int64_t frame_count = 0;
    std::int64_t interval_ps = 0;
    std::int64_t atom_count = 0;
};

// Drops bonds at or below the threshold. Idempotent.
void apply_threshold(Frame& frame, BondThreshold threshold);

// Streaming reader for frames.jsonl:
//   {"trajectory_id": str, "time_ps": int, "elements": [str,...], "bonds": [[i,j,bo],...]}
// Validates record shape, element symbols, bond endpoints, and per-trajectory
// time monotonicity with a constant inter-frame interval. Frames from
// different trajectories may interleave. Thresholding is applied before the
// frame is handed out.
class FrameReader {
public:
    FrameReader(const std::filesystem::path& path, BondThreshold threshold);
    ~FrameReader();
    FrameReader(FrameReader&&) noexcept;

    std::optional<Frame> next();

    // Inter-frame interval per trajectory seen so far (set from the second frame on).
    const std::map<std::string, std::int64_t>& intervals() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

void write_frame(std::ostream& out, const Frame& frame);

std::vector<Frame> read_frames(const std::filesystem::path& path, BondThreshold threshold);

// Manifest over the frames of a single trajectory. Requires at least two
// frames, one trajectory_id, a constant interval, and a constant atom count.
TrajectoryManifest validate_trajectory(const std::vector<Frame>& frames);

}  // namespace evomd
