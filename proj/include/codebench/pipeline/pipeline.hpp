#pragma once

#include "codebench/pipeline/funnel.hpp"
#include "codebench/pipeline/stages.hpp"

#include <optional>
#include <vector>

namespace codebench::pipeline {

struct PipelineResult {
    std::vector<EvalExample> emitted;
    FunnelReport funnel;
    std::vector<StageState> states;  // one per input fragment, in input order
    FilterResult filter;
};

/// Steps 1 to 4 minus the final filter for one fragment. Content failures are recorded in
/// state and yield nullopt; infrastructure and non-refusal gateway errors propagate.
std::optional<EvalExample> build_example(const corpus::SourceFragment& frag, const PipelineServices& svc,
                                         const PipelineConfig& cfg, StageState& state);

/// Fills metadata: names, flags, complexity metrics and similarity to the source fragment.
void annotate(EvalExample& example, const corpus::SourceFragment& frag, const StageState& state);

/// Drives every fragment through all stages on `cfg.jobs` workers, then runs the final filter.
/// Throws on infrastructure failure (no partial emission).
PipelineResult run_pipeline(const std::vector<corpus::SourceFragment>& frags, const PipelineConfig& cfg,
                            const PipelineServices& svc);

}  // namespace codebench::pipeline
