#pragma once

#include <filesystem>
#include <string>

#ifndef NEURORATE_TEST_DATA_DIR
#error "NEURORATE_TEST_DATA_DIR must be defined by the build"
#endif
#ifndef NEURORATE_TEST_SCRATCH_DIR
#error "NEURORATE_TEST_SCRATCH_DIR must be defined by the build"
#endif

namespace test_paths {

inline std::filesystem::path data_dir() { return NEURORATE_TEST_DATA_DIR; }

/// Fresh, empty directory under the build tree.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::path(NEURORATE_TEST_SCRATCH_DIR) / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace test_paths
