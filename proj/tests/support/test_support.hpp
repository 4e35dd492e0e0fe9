#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace codebench::testing {

inline std::filesystem::path fixture_dir()
{
    return CODEBENCH_FIXTURE_DIR;
}

std::string read_fixture(const std::string& relative);

/// Shim invocation for the test-only Python shim under fixtures/shim.
inline std::vector<std::string> mini_shim_command()
{
    return {"{python}", (fixture_dir() / "shim" / "mini_shim.py").string()};
}

/// A scratch directory removed on destruction.
class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    [[nodiscard]] const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace codebench::testing
