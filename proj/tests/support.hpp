#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>

#include "agri/telemetry.hpp"

namespace agri::fx {

inline std::filesystem::path data_dir() { return AGRI_DATA_DIR; }
inline std::filesystem::path test_data_dir() { return AGRI_TEST_DATA_DIR; }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
  public:
    TempDir() {
        static std::atomic<int> counter{0};
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("agri-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    [[nodiscard]] const std::filesystem::path& path() const { return path_; }

  private:
    std::filesystem::path path_;
};

/// Mid-range loam reading; tests override the metrics they care about.
inline SensorReading reading(const std::string& node, std::uint64_t seq, Timestamp ts) {
    SensorReading r;
    r.node_id = node;
    r.seq = seq;
    r.timestamp = ts;
    r.set(Metric::temperature, 25.0);
    r.set(Metric::moisture, 50.0);
    r.set(Metric::ph, 6.8);
    r.set(Metric::ec, 1500.0);
    r.set(Metric::nitrogen, 150.0);
    r.set(Metric::phosphorus, 40.0);
    r.set(Metric::potassium, 200.0);
    return r;
}

} // namespace agri::fx
