#pragma once

#include "codebench/executor/environment.hpp"
#include "codebench/util/jsonl.hpp"

#include <atomic>
#include <set>

namespace codebench::testing {

/// Offline stand-in for pip: every requirement becomes an importable package whose
/// `__version__` is the pinned version ("0" when unpinned). Names in `unresolvable` fail.
class FakeInstaller : public executor::PackageInstaller {
public:
    std::set<std::string> unresolvable;
    std::atomic<int> calls{0};

    void install(const std::vector<executor::Requirement>& requirements, const std::filesystem::path& target,
                 const std::filesystem::path&) override
    {
        ++calls;
        for (const auto& r : requirements) {
            if (unresolvable.count(r.name)) {
                throw executor::EnvironmentError("cannot resolve " + r.name,
                                                 "ERROR: No matching distribution found for " + r.str());
            }
            std::string module = r.name;
            for (char& c : module) {
                if (c == '-') c = '_';
            }
            std::string version = "0";
            if (r.specifier.rfind("==", 0) == 0) version = r.specifier.substr(2);
            write_text(target / module / "__init__.py", "__version__ = \"" + version + "\"\n");
        }
    }
};

}  // namespace codebench::testing
