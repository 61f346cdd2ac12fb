#include <algorithm>

#include "doctest.h"

#include "sketchloop/orchestrator.hpp"
#include "sketchloop/seqcodec.hpp"

using namespace sketchloop;

namespace {

RunResult clean_run(const char* prompt, uint64_t seed) {
  RunConfig rc;
  rc.seed = seed;
  return run_trajectory(prompt, rc);
}

std::vector<std::string> tag_sequence(const TokenStream& s) {
  std::vector<std::string> tags;
  for (const auto& t : s.tokens)
    if (t.type == Token::Type::Tag) tags.push_back(t.text);
  return tags;
}

}  // namespace

TEST_CASE("a one step run encodes to the expected token shape") {
  RunResult rr = clean_run("red circle", 0);
  REQUIRE(rr.trajectory.meta.steps == 1);
  TokenStream s = encode_trajectory(rr.trajectory);

  // prompt(2) + ins block(5) + des block(4) + vision block(38) + eos(1)
  CHECK(s.tokens.size() == 50);
  CHECK(s.tokens[0].type == Token::Type::Word);
  CHECK(s.tokens[0].text == "red");
  CHECK(s.tokens[1].text == "circle");
  CHECK(s.tokens[2].text == kTagIns);
  CHECK(s.tokens.back().type == Token::Type::Eos);

  std::vector<std::string> want = {kTagIns,        kTagInsEnd,
                                   kTagDes,        kTagDesEnd,
                                   kTagVisionStart, kTagVisionEnd};
  CHECK(tag_sequence(s) == want);
  int images = 0;
  for (const auto& t : s.tokens)
    if (t.type == Token::Type::Image) ++images;
  CHECK(images == 36);
}

TEST_CASE("refines encode between the faulty and repaired visions") {
  bool exercised = false;
  for (uint64_t seed = 0; seed < 60 && !exercised; ++seed) {
    RunConfig rc;
    rc.seed = seed;
    rc.sketch_faults = FaultModel::uniform(0.4);
    RunResult rr = run_trajectory("red circle above blue square", rc);
    if (rr.trajectory.meta.refine_rounds != 1) continue;
    exercised = true;
    TokenStream s = encode_trajectory(rr.trajectory);
    auto tags = tag_sequence(s);
    auto it = std::find(tags.begin(), tags.end(), kTagRefine);
    REQUIRE(it != tags.end());
    REQUIRE(it != tags.begin());
    CHECK(*(it - 1) == kTagVisionEnd);
    auto end_it = std::find(it, tags.end(), kTagRefineEnd);
    REQUIRE(end_it != tags.end());
    REQUIRE(end_it + 1 != tags.end());
    CHECK(*(end_it + 1) == kTagVisionStart);
  }
  CHECK(exercised);
}

TEST_CASE("decode inverts encode across seeded runs") {
  SceneSamplerConfig sc;
  for (uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(hash_combine(0xc0decull, seed));
    SceneGraph full = sample_scene(rng, sc);
    RunConfig rc;
    rc.seed = seed;
    rc.sketch_faults = FaultModel::uniform(seed % 3 == 0 ? 0.4 : 0.0);
    RunResult rr = run_trajectory(print_scene(full), rc);
    TokenStream s = encode_trajectory(rr.trajectory);
    Trajectory back = decode_stream(s);
    CHECK(same_content(back, rr.trajectory));
    CHECK(encode_trajectory(back) == s);
  }
}

TEST_CASE("editing mode round-trips the initial image block") {
  SceneGraph start = parse_scene("red circle");
  RasterImage initial = render(layout(start), start);
  RunConfig rc;
  rc.seed = 4;
  RunResult rr = run_trajectory("red circle above blue square", rc, initial);
  TokenStream s = encode_trajectory(rr.trajectory);
  // The first non-word token opens the initial vision block.
  size_t i = 0;
  while (i < s.tokens.size() && s.tokens[i].type == Token::Type::Word) ++i;
  REQUIRE(i < s.tokens.size());
  CHECK(s.tokens[i].text == kTagVisionStart);
  Trajectory back = decode_stream(s);
  REQUIRE(back.initial.has_value());
  CHECK(*back.initial == initial);
  CHECK(same_content(back, rr.trajectory));
}

TEST_CASE("forced inspect blocks survive the round trip") {
  RunConfig rc;
  rc.seed = 7;
  rc.force_emit_clean_inspect = true;
  RunResult rr = run_trajectory("red circle above blue square", rc);
  TokenStream s = encode_trajectory(rr.trajectory);
  Trajectory back = decode_stream(s);
  CHECK(same_content(back, rr.trajectory));
  bool inspect_seen = false;
  for (const auto& seg : back.segments)
    if (seg.kind == SegmentKind::Inspect) {
      inspect_seen = true;
      CHECK(seg.text == kInspectOkWord);
    }
  CHECK(inspect_seen);
}

TEST_CASE("malformed streams are rejected with codec errors") {
  RunResult rr = clean_run("red circle", 1);
  TokenStream good = encode_trajectory(rr.trajectory);

  TokenStream no_close = good;
  // Drop the </ins> tag.
  no_close.tokens.erase(
      std::find_if(no_close.tokens.begin(), no_close.tokens.end(),
                   [](const Token& t) { return t.text == kTagInsEnd; }));
  CHECK_THROWS_AS(decode_stream(no_close), CodecError);

  TokenStream cut = good;
  // Truncate in the middle of the vision payload (and lose the eos).
  auto vs = std::find_if(cut.tokens.begin(), cut.tokens.end(),
                         [](const Token& t) { return t.text == kTagVisionStart; });
  cut.tokens.erase(vs + 5, cut.tokens.end());
  CHECK_THROWS_AS(decode_stream(cut), CodecError);

  TokenStream no_eos = good;
  no_eos.tokens.pop_back();
  CHECK_THROWS_AS(decode_stream(no_eos), CodecError);

  TokenStream trailing = good;
  Token extra;
  extra.type = Token::Type::Word;
  extra.text = "stray";
  trailing.tokens.push_back(extra);
  CHECK_THROWS_AS(decode_stream(trailing), CodecError);

  TokenStream short_img = good;
  // Remove one image token so the vision payload is 35 cells.
  short_img.tokens.erase(
      std::find_if(short_img.tokens.begin(), short_img.tokens.end(),
                   [](const Token& t) { return t.type == Token::Type::Image; }));
  CHECK_THROWS_AS(decode_stream(short_img), CodecError);
}

TEST_CASE("the loss mask splits prompt, text and vision as intended") {
  RunResult rr = clean_run("red circle", 2);
  TokenStream s = encode_trajectory(rr.trajectory);
  LossMask m = loss_mask(s);
  REQUIRE(m.ce.size() == s.tokens.size());

  // Prompt words carry no text loss; block contents and every tag do.
  CHECK(!m.ce[0]);
  CHECK(!m.ce[1]);
  size_t ce_count = 0;
  for (bool b : m.ce) ce_count += b ? 1 : 0;
  // 6 tags + 3 instruction words + 2 scene words.
  CHECK(ce_count == 11);
  for (size_t i = 0; i < s.tokens.size(); ++i) {
    if (s.tokens[i].type == Token::Type::Image ||
        s.tokens[i].type == Token::Type::Eos) {
      CHECK(!m.ce[i]);
    }
    if (s.tokens[i].type == Token::Type::Tag) CHECK(m.ce[i]);
  }
  REQUIRE(m.mse.size() == 1);
  CHECK(m.mse[0]);
}

TEST_CASE("the initial vision block is input, not target") {
  SceneGraph start = parse_scene("red circle");
  RasterImage initial = render(layout(start), start);
  RunConfig rc;
  rc.seed = 4;
  RunResult rr = run_trajectory("red circle above blue square", rc, initial);
  TokenStream s = encode_trajectory(rr.trajectory);
  LossMask m = loss_mask(s);
  size_t blocks = 0;
  for (const auto& t : s.tokens)
    if (t.type == Token::Type::Tag && t.text == kTagVisionStart) ++blocks;
  REQUIRE(m.mse.size() == blocks);
  CHECK(!m.mse[0]);
  for (size_t i = 1; i < m.mse.size(); ++i) CHECK(m.mse[i]);
}

TEST_CASE("mask flags agree with an independent scan") {
  SceneSamplerConfig sc;
  for (uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(hash_combine(0x3a5cull, seed));
    SceneGraph full = sample_scene(rng, sc);
    RunConfig rc;
    rc.seed = seed;
    rc.sketch_faults = FaultModel::uniform(0.3);
    RunResult rr = run_trajectory(print_scene(full), rc);
    TokenStream s = encode_trajectory(rr.trajectory);
    LossMask m = loss_mask(s);

    bool inside = false;
    bool plan_seen = false;
    size_t block = 0;
    for (size_t i = 0; i < s.tokens.size(); ++i) {
      const Token& t = s.tokens[i];
      if (t.type == Token::Type::Tag) {
        CHECK(m.ce[i]);
        if (t.text == kTagIns) plan_seen = true;
        if (t.text == kTagIns || t.text == kTagDes || t.text == kTagRefine)
          inside = true;
        if (t.text == kTagInsEnd || t.text == kTagDesEnd ||
            t.text == kTagRefineEnd)
          inside = false;
        if (t.text == kTagVisionStart) {
          REQUIRE(block < m.mse.size());
          CHECK(m.mse[block] == plan_seen);
          ++block;
        }
      } else if (t.type == Token::Type::Word) {
        CHECK(m.ce[i] == inside);
      } else {
        CHECK(!m.ce[i]);
      }
    }
    CHECK(block == m.mse.size());
  }
}

TEST_CASE("token streams round-trip through json") {
  RunConfig rc;
  rc.seed = 9;
  rc.sketch_faults = FaultModel::uniform(0.5);
  RunResult rr = run_trajectory("red circle above blue square", rc);
  TokenStream s = encode_trajectory(rr.trajectory);
  std::string j = stream_to_json(s);
  CHECK(stream_from_json(j) == s);
  CHECK_THROWS_AS(stream_from_json("{"), CodecError);
  CHECK_THROWS_AS(stream_from_json(R"([{"t":"img","s":9,"c":1}])"), CodecError);
  CHECK_THROWS_AS(stream_from_json(R"([{"t":"mystery"}])"), CodecError);
}

TEST_CASE("the display form collapses image payloads") {
  RunResult rr = clean_run("red circle", 3);
  TokenStream s = encode_trajectory(rr.trajectory);
  std::string d = stream_display(s);
  CHECK(d.find(kTagIns) != std::string::npos);
  CHECK(d.find(kTagVisionStart) != std::string::npos);
  CHECK(d.find('[') != std::string::npos);
  CHECK(d.find(']') != std::string::npos);
  // 36 separate image tokens never appear verbatim.
  CHECK(d.find("red circle") != std::string::npos);
}

TEST_CASE("content comparison ignores run metadata detail") {
  RunResult a = clean_run("red circle", 5);
  RunResult b = clean_run("red circle", 5);
  CHECK(same_content(a.trajectory, b.trajectory));
  Trajectory mutated = b.trajectory;
  mutated.segments[0].ins_text += " x";
  CHECK(!same_content(a.trajectory, mutated));
  Trajectory counted = b.trajectory;
  counted.meta.steps += 1;
  CHECK(!same_content(a.trajectory, counted));
}
