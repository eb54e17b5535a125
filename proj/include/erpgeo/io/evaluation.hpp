#pragma once

// Batch evaluation over a clip manifest with an append-only progress file.

#include <algorithm>
#include <array>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "erpgeo/io/binary.hpp"
#include "erpgeo/io/clip.hpp"
#include "erpgeo/io/json.hpp"
#include "erpgeo/metrics.hpp"

namespace erpgeo::io {

inline const std::set<std::string>& known_sources() {
  static const std::set<std::string> s = {"panogeo_heldout", "argus", "habitat"};
  return s;
}

inline const std::vector<std::string>& embedding_keys() {
  static const std::vector<std::string> k = {"fvd", "faed", "fid", "clip"};
  return k;
}

/// Files of one side (prediction or ground truth) of a clip. Paths are
/// resolved against the manifest directory.
struct BundlePaths {
  std::string frames_dir;
  std::optional<std::string> depth_file;
  std::optional<std::string> tracks_file;
  std::optional<std::string> poses_file;
  std::map<std::string, std::string> embeddings;
};

struct ManifestClip {
  std::string id;
  std::string source;
  BundlePaths pred;
  BundlePaths gt;
  std::optional<std::string> caption_embedding;
};

namespace detail {
inline std::string resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return (path.is_absolute() ? path : base / path).lexically_normal().string();
}

inline BundlePaths bundle(const Json& j, const std::filesystem::path& base, const std::string& where,
                          std::vector<std::string>& problems) {
  BundlePaths b;
  if (!j.is_object()) {
    problems.push_back(where + ": must be an object");
    return b;
  }
  if (!j.contains("frames_dir") || !j["frames_dir"].is_string())
    problems.push_back(where + ": frames_dir is required");
  else
    b.frames_dir = resolve(base, j["frames_dir"].get<std::string>());
  auto opt_path = [&](const char* key, std::optional<std::string>& dst) {
    if (!j.contains(key) || j[key].is_null()) return;
    if (!j[key].is_string()) {
      problems.push_back(where + ": " + key + " must be a string");
      return;
    }
    dst = resolve(base, j[key].get<std::string>());
  };
  opt_path("depth_file", b.depth_file);
  opt_path("tracks_file", b.tracks_file);
  opt_path("poses_file", b.poses_file);
  if (j.contains("embeddings") && !j["embeddings"].is_null()) {
    for (const auto& [key, val] : j["embeddings"].items()) {
      if (std::find(embedding_keys().begin(), embedding_keys().end(), key) == embedding_keys().end()) {
        problems.push_back(where + ": unknown embedding key '" + key + "'");
      } else if (!val.is_null()) {
        if (!val.is_string())
          problems.push_back(where + ": embedding '" + key + "' must be a path");
        else
          b.embeddings[key] = resolve(base, val.get<std::string>());
      }
    }
  }
  return b;
}

inline void list_missing(const BundlePaths& b, const std::string& where, std::vector<std::string>& missing) {
  auto check = [&](const std::string& p, const std::string& what) {
    if (!std::filesystem::exists(p)) missing.push_back(where + ": " + what + " not found: " + p);
  };
  if (!b.frames_dir.empty()) check((std::filesystem::path(b.frames_dir) / "video.json").string(), "frames sidecar");
  if (b.depth_file) check(*b.depth_file, "depth_file");
  if (b.tracks_file) check(*b.tracks_file, "tracks_file");
  if (b.poses_file) check(*b.poses_file, "poses_file");
  for (const auto& [k, p] : b.embeddings) check(p, "embedding '" + k + "'");
}

inline std::string itemize(const std::string& head, const std::vector<std::string>& items) {
  std::string msg = head;
  for (const auto& s : items) msg += "\n  - " + s;
  return msg;
}
}  // namespace detail

/// Parses a manifest: a JSON list of clips or {"clips": [...]}. Structural
/// problems raise ValidationError; missing files raise IoError. Both list
/// every offending clip.
inline std::vector<ManifestClip> read_manifest(const std::string& path) {
  const Json j = read_json(path);
  const std::filesystem::path base = std::filesystem::path(path).parent_path();
  const Json* list = &j;
  if (j.is_object() && j.contains("clips")) list = &j["clips"];
  if (!list->is_array()) throw ValidationError("'" + path + "': manifest must be a list of clips");

  std::vector<std::string> problems;
  std::vector<ManifestClip> clips;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < list->size(); ++i) {
    const Json& c = (*list)[i];
    ManifestClip mc;
    std::string where = "clip #" + std::to_string(i);
    if (!c.is_object()) {
      problems.push_back(where + ": must be an object");
      continue;
    }
    if (!c.contains("id") || !c["id"].is_string() || c["id"].get<std::string>().empty()) {
      problems.push_back(where + ": id is required");
    } else {
      mc.id = c["id"].get<std::string>();
      where = "clip " + mc.id;
      if (!seen.insert(mc.id).second) problems.push_back(where + ": duplicate id");
    }
    mc.source = c.value("source", std::string());
    if (!known_sources().count(mc.source))
      problems.push_back(where + ": source must be one of panogeo_heldout, argus, habitat");
    if (!c.contains("pred")) problems.push_back(where + ": pred bundle is required");
    if (!c.contains("gt")) problems.push_back(where + ": gt bundle is required");
    if (c.contains("pred")) mc.pred = detail::bundle(c["pred"], base, where + " pred", problems);
    if (c.contains("gt")) mc.gt = detail::bundle(c["gt"], base, where + " gt", problems);
    if (c.contains("pred") && !mc.pred.depth_file) problems.push_back(where + " pred: depth_file is required");
    if (c.contains("pred") && !mc.pred.tracks_file) problems.push_back(where + " pred: tracks_file is required");
    if (c.contains("caption_embedding") && c["caption_embedding"].is_string())
      mc.caption_embedding = detail::resolve(base, c["caption_embedding"].get<std::string>());
    clips.push_back(std::move(mc));
  }
  if (!problems.empty()) throw ValidationError(detail::itemize("'" + path + "': invalid manifest", problems));

  std::vector<std::string> missing;
  for (const ManifestClip& c : clips) {
    detail::list_missing(c.pred, "clip " + c.id + " pred", missing);
    detail::list_missing(c.gt, "clip " + c.id + " gt", missing);
    if (c.caption_embedding && !std::filesystem::exists(*c.caption_embedding))
      missing.push_back("clip " + c.id + ": caption_embedding not found: " + *c.caption_embedding);
  }
  if (!missing.empty()) throw IoError(detail::itemize("'" + path + "': missing inputs", missing));
  std::sort(clips.begin(), clips.end(), [](const ManifestClip& a, const ManifestClip& b) { return a.id < b.id; });
  return clips;
}

/// Loads what the metrics need. Ground-truth depth and tracks are not read.
inline ClipData load_bundle(const BundlePaths& b, bool geometry) {
  ClipData d;
  d.num_frames = read_video_info(b.frames_dir).num_frames;
  if (geometry) {
    if (b.depth_file) d.depth = read_depth(*b.depth_file);
    if (b.tracks_file) d.tracks = read_tracks(*b.tracks_file);
    if (b.poses_file) d.poses = read_poses(*b.poses_file);
  }
  for (const auto& [k, p] : b.embeddings) d.embeddings[k] = read_embeddings(p);
  return d;
}

inline std::optional<Eigen::VectorXd> load_caption(const ManifestClip& c) {
  if (!c.caption_embedding) return std::nullopt;
  const Eigen::MatrixXd e = read_embeddings(*c.caption_embedding);
  if (e.rows() != 1) throw ValidationError("clip " + c.id + ": caption embedding must hold exactly one row");
  return Eigen::VectorXd(e.row(0).transpose());
}

inline MetricRow evaluate_manifest_clip(const ManifestClip& c, const EvalOptions& opt) {
  try {
    const ClipData pred = load_bundle(c.pred, true);
    const ClipData gt = load_bundle(c.gt, false);
    return evaluate_clip(c.id, c.source, pred, gt, opt, load_caption(c));
  } catch (const IoError& e) {
    throw IoError("clip " + c.id + ": " + e.what());
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    throw ValidationError(msg.rfind("clip ", 0) == 0 ? msg : "clip " + c.id + ": " + msg);
  }
}

// ---------------------------------------------------------------------------
// Row serialization

inline OrderedJson row_to_json(const MetricRow& r) {
  OrderedJson j;
  j["clip_id"] = r.clip_id;
  j["source"] = r.source;
  for (std::size_t k = 0; k < kNumMetrics; ++k)
    j[kMetricNames[k]] = r.values[k] ? OrderedJson(*r.values[k]) : OrderedJson(nullptr);
  OrderedJson notes = OrderedJson::object();
  for (const auto& [k, v] : r.notes) notes[k] = v;
  j["notes"] = std::move(notes);
  return j;
}

inline MetricRow row_from_json(const Json& j) {
  MetricRow r;
  r.clip_id = j.at("clip_id").get<std::string>();
  r.source = j.at("source").get<std::string>();
  for (std::size_t k = 0; k < kNumMetrics; ++k) {
    const Json& v = j.at(kMetricNames[k]);
    if (!v.is_null()) r.values[k] = v.get<double>();
  }
  if (j.contains("notes"))
    for (const auto& [k, v] : j["notes"].items()) r.notes[k] = v.get<std::string>();
  return r;
}

/// Completed rows from a progress file. A torn final line (interrupted
/// append) is ignored.
inline std::map<std::string, MetricRow> read_progress(const std::string& path) {
  std::map<std::string, MetricRow> rows;
  std::ifstream is(path, std::ios::binary);
  if (!is) return rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    try {
      MetricRow r = row_from_json(Json::parse(line));
      rows.emplace(r.clip_id, std::move(r));
    } catch (const Json::exception&) {
      continue;
    }
  }
  return rows;
}

struct EvalRunOptions {
  EvalOptions eval;
  std::size_t workers = 1;
  /// Stop after this many newly evaluated clips (simulates an interrupted run).
  std::optional<std::size_t> max_clips;
};

struct EvalRunSummary {
  std::size_t total = 0;
  std::size_t skipped = 0;
  std::size_t evaluated = 0;
  std::size_t remaining = 0;
};

inline OrderedJson aggregate_to_json(const std::vector<SourceAggregate>& aggs, const EvalOptions& opt) {
  OrderedJson j;
  j["t_eval"] = opt.t_eval;
  j["fid_mode"] = opt.fid_mode == FidMode::kPerFrame ? "per_frame" : "clip_mean";
  OrderedJson sources = OrderedJson::object();
  for (const SourceAggregate& a : aggs) {
    OrderedJson s;
    s["clips"] = a.clips;
    OrderedJson mean = OrderedJson::object(), count = OrderedJson::object(), pooled = OrderedJson::object();
    for (std::size_t k = 0; k < kNumMetrics; ++k) {
      mean[kMetricNames[k]] = a.mean[k] ? OrderedJson(*a.mean[k]) : OrderedJson(nullptr);
      count[kMetricNames[k]] = a.count[k];
    }
    for (std::size_t k = 0; k < 3; ++k)
      pooled[kMetricNames[k]] = a.pooled[k] ? OrderedJson(*a.pooled[k]) : OrderedJson(nullptr);
    s["mean"] = std::move(mean);
    s["count"] = std::move(count);
    s["pooled"] = std::move(pooled);
    sources[a.source] = std::move(s);
  }
  j["sources"] = std::move(sources);
  return j;
}

/// Bucket-level Fréchet distances on embeddings pooled across each source
/// and across all clips. Embeddings are re-read from the manifest.
inline void add_pooled_frechet(std::vector<SourceAggregate>& aggs, const std::vector<ManifestClip>& clips,
                               const std::set<std::string>& done, const EvalOptions& opt) {
  std::map<std::string, std::array<PooledRows, 3>> pools;
  for (const ManifestClip& c : clips) {
    if (!done.count(c.id)) continue;
    ClipData pred, gt;
    pred.num_frames = read_video_info(c.pred.frames_dir).num_frames;
    gt.num_frames = read_video_info(c.gt.frames_dir).num_frames;
    for (const auto& [k, p] : c.pred.embeddings) pred.embeddings[k] = read_embeddings(p);
    for (const auto& [k, p] : c.gt.embeddings) gt.embeddings[k] = read_embeddings(p);
    for (std::size_t k = 0; k < 3; ++k) {
      const auto a = frechet_rows(pred, kFrechetMetrics[k], opt);
      const auto b = frechet_rows(gt, kFrechetMetrics[k], opt);
      if (!a || !b) continue;
      for (const std::string& bucket : {c.source, std::string(kAllSources)}) {
        pools[bucket][k].pred.push_back(*a);
        pools[bucket][k].gt.push_back(*b);
      }
    }
  }
  for (SourceAggregate& a : aggs) {
    auto it = pools.find(a.source);
    if (it == pools.end()) continue;
    for (std::size_t k = 0; k < 3; ++k) a.pooled[k] = pooled_frechet(it->second[k]);
  }
}

/// Evaluates every manifest clip not yet in <out>/progress.jsonl, appending
/// rows in clip-id order in batches of `workers`, then rewrites
/// report.jsonl, aggregate.json and table.txt from all completed rows.
inline EvalRunSummary run_evaluation(const std::string& manifest, const std::string& out_dir,
                                     const EvalRunOptions& opt) {
  require(opt.workers >= 1, "eval: workers must be >= 1");
  require(opt.eval.t_eval >= 3, "eval: t_eval must be >= 3");
  const std::vector<ManifestClip> clips = read_manifest(manifest);
  const std::filesystem::path out(out_dir);
  ensure_dir(out);
  const std::string progress_path = (out / "progress.jsonl").string();
  std::map<std::string, MetricRow> rows = read_progress(progress_path);

  EvalRunSummary sum;
  sum.total = clips.size();
  std::vector<const ManifestClip*> todo;
  for (const ManifestClip& c : clips) {
    if (rows.count(c.id))
      ++sum.skipped;
    else
      todo.push_back(&c);
  }
  if (opt.max_clips && todo.size() > *opt.max_clips) todo.resize(*opt.max_clips);

  // The file is only rewritten when it carries a torn line or rows that are
  // not in this manifest; otherwise it is strictly appended to.
  {
    std::string expected;
    for (const ManifestClip& c : clips) {
      auto it = rows.find(c.id);
      if (it != rows.end()) expected += row_to_json(it->second).dump() + "\n";
    }
    std::ifstream is(progress_path, std::ios::binary);
    const std::string current((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    if (current != expected) {
      std::ofstream os(progress_path, std::ios::binary | std::ios::trunc);
      if (!os) throw IoError("cannot open '" + progress_path + "' for writing");
      os << expected;
    }
  }

  for (std::size_t start = 0; start < todo.size(); start += opt.workers) {
    const std::size_t n = std::min(opt.workers, todo.size() - start);
    std::vector<std::optional<MetricRow>> batch(n);
    std::vector<std::exception_ptr> errors(n);
    auto work = [&](std::size_t i) {
      try {
        batch[i] = evaluate_manifest_clip(*todo[start + i], opt.eval);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    };
    std::vector<std::thread> pool;
    for (std::size_t i = 1; i < n; ++i) pool.emplace_back(work, i);
    work(0);
    for (std::thread& t : pool) t.join();

    std::ofstream os(progress_path, std::ios::binary | std::ios::app);
    if (!os) throw IoError("cannot append to '" + progress_path + "'");
    for (std::size_t i = 0; i < n; ++i) {
      if (errors[i]) std::rethrow_exception(errors[i]);
      os << row_to_json(*batch[i]).dump() << "\n";
      os.flush();
      rows.emplace(batch[i]->clip_id, std::move(*batch[i]));
      ++sum.evaluated;
    }
  }

  std::vector<MetricRow> ordered;
  std::set<std::string> done;
  for (const ManifestClip& c : clips) {
    auto it = rows.find(c.id);
    if (it == rows.end()) continue;
    ordered.push_back(it->second);
    done.insert(c.id);
  }
  sum.remaining = sum.total - ordered.size();

  {
    const std::string p = (out / "report.jsonl").string();
    std::ofstream os(p, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open '" + p + "' for writing");
    for (const MetricRow& r : ordered) os << row_to_json(r).dump() << "\n";
  }
  std::vector<SourceAggregate> aggs = aggregate(ordered);
  add_pooled_frechet(aggs, clips, done, opt.eval);
  write_json((out / "aggregate.json").string(), aggregate_to_json(aggs, opt.eval));
  {
    const std::string p = (out / "table.txt").string();
    std::ofstream os(p, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open '" + p + "' for writing");
    os << format_table(aggs);
  }
  return sum;
}

}  // namespace erpgeo::io
