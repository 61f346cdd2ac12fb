#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sketchloop/microworld.hpp"
#include "sketchloop/planner.hpp"
#include "sketchloop/scene_graph.hpp"

namespace sketchloop {

// Outcomes of the two inspection checks. The text check over a claimed
// working scene yields one of the first four; the image check yields
// Aligned or Misaligned.
enum class InspectStatus : uint8_t {
  ConsistentComplete,
  ConsistentIncomplete,
  Conflict,
  MalformedClaim,
  Aligned,
  Misaligned,
};
const std::string& inspect_status_name(InspectStatus s);
InspectStatus inspect_status_from_name(const std::string& name);

struct Finding {
  FaultKind kind = FaultKind::None;
  std::string text;
  friend bool operator==(const Finding&, const Finding&) = default;
};

// Diagnosis plus repair. rendered_text is the corrective rendered as
// instructions; parsing it back yields `corrective`.
struct Critique {
  std::vector<Finding> findings;
  EditScript corrective;
  std::string rendered_text;
};

struct Verdict {
  InspectStatus status = InspectStatus::ConsistentComplete;
  std::optional<Critique> critique;  // present for Conflict and Misaligned
};

// Compares a claimed working scene (des text) against the target scene.
// Claims that are a subset of the target, or assert relations the target
// merely leaves open, are consistent; an object absent from the target or a
// relation contradicting it on the same axis is a conflict. The corrective
// repairs the claim: applying it to the parsed claim removes every
// contradiction. Unparseable text reports MalformedClaim.
Verdict check_text_conflict(const SceneGraph& target,
                            const std::string& des_text);

// Semantic scene membership: the image holds exactly g's objects (as a
// shape and color multiset) and some within-group assignment of cells
// satisfies every relation of g.
bool image_matches_scene(const SceneGraph& g, const RasterImage& img);

// Compares an observed image against the intended scene and cells. Aligned
// means the object multiset matches and some within-group assignment of
// observed cells satisfies every intended relation. Otherwise each deviation
// becomes a finding, and the corrective holds instructions that repair the
// image (references resolve against the observed image's own keying).
Verdict check_image_alignment(const SimState& expected,
                              const RasterImage& observed);

// Blind reconstruction of the intended state after one step, from the image
// before it, the step's instructions, and the claimed scene afterwards.
// Placement of new objects replays the instructions through the layout
// engine with the observed cells held fixed.
SimState reconstruct_expected(const RasterImage& before,
                              const std::string& ins_text,
                              const std::string& des_text);

class JudgeError : public std::runtime_error {
 public:
  explicit JudgeError(const std::string& what) : std::runtime_error(what) {}
};

// Step-level judge: given the target prompt, one step and its surrounding
// images, report a conflict or misalignment verdict. Text conflicts take
// precedence over image misalignment.
class Judge {
 public:
  virtual ~Judge() = default;
  virtual Verdict judge_step(const std::string& prompt_dsl,
                             const std::string& ins_text,
                             const std::string& des_text,
                             const RasterImage& before,
                             const RasterImage& after) = 0;
};

// In-process judge built on the checks above.
class ExactJudge : public Judge {
 public:
  Verdict judge_step(const std::string& prompt_dsl, const std::string& ins_text,
                     const std::string& des_text, const RasterImage& before,
                     const RasterImage& after) override;
};

// Transport for the wire judge: request JSON in, response JSON out, or
// nullopt for a delivery failure the caller may retry.
using WireTransport =
    std::function<std::optional<std::string>(const std::string&)>;

struct WireJudgeConfig {
  int max_attempts = 3;
};

// Judge speaking a JSON wire contract. Request fields: prompt_dsl, ins_text,
// des_text, before_image, after_image (images in wire cell form). Response
// fields: status, findings (kind + text), corrective_ins. Retries failed
// deliveries up to max_attempts, then throws JudgeError.
class WireJudge : public Judge {
 public:
  explicit WireJudge(WireTransport transport, WireJudgeConfig cfg = {});
  Verdict judge_step(const std::string& prompt_dsl, const std::string& ins_text,
                     const std::string& des_text, const RasterImage& before,
                     const RasterImage& after) override;

 private:
  WireTransport transport_;
  WireJudgeConfig cfg_;
};

// Server half of the wire contract: decodes a request JSON string, runs
// ExactJudge, encodes the verdict. Pass as-is to WireJudge for a loopback
// setup.
std::string serve_judge_request(const std::string& request_json);

}  // namespace sketchloop
