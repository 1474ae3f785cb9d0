// SPDX-License-Identifier: Apache-2.0

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "mdbpe/binary_io.hpp"
#include "mdbpe/codec.hpp"
#include "mdbpe/collapse.hpp"
#include "mdbpe/error.hpp"
#include "mdbpe/ingest.hpp"
#include "mdbpe/seqfeat.hpp"
#include "mdbpe/trainer.hpp"

namespace {

using namespace mdbpe;
using nlohmann::json;

struct Common {
  std::size_t threads = 1;
  bool json_out = false;
  bool quiet = false;
};

void log(const Common& c, const std::string& line) {
  if (!c.quiet) std::cerr << line << '\n';
}

std::string percent(double ratio) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", ratio * 100.0);
  return buf;
}

// "all", a bit mask ("3"), or axis names ("row,col").
AxisMask parse_axes(const std::string& text) {
  if (text == "all") return AxisMask::all();
  if (!text.empty() && std::all_of(text.begin(), text.end(), ::isdigit)) {
    const unsigned long v = std::stoul(text);
    if (v == 0 || v > 7) throw Error(ErrorCategory::kInvalidArgument, "axis mask must be 1..7");
    return AxisMask(static_cast<std::uint8_t>(v));
  }
  std::uint8_t bits = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find(',', start), text.size());
    const std::string name = text.substr(start, end - start);
    if (name == "row" || name == "0") {
      bits |= 1;
    } else if (name == "col" || name == "1") {
      bits |= 2;
    } else if (name == "depth" || name == "2") {
      bits |= 4;
    } else {
      throw Error(ErrorCategory::kInvalidArgument, "unknown axis '" + name + "'");
    }
    start = end + 1;
  }
  return AxisMask(bits);
}

std::size_t default_threads() {
  if (const char* env = std::getenv("MDBPE_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
    std::cerr << "ignoring MDBPE_THREADS=" << env << '\n';
  }
  return 1;
}

void emit_json(const Common& c, const json& summary) {
  if (c.json_out) std::cout << summary.dump(2) << '\n';
}

TokenClass infer_base_size(const std::vector<TokenGrid>& corpus) {
  TokenClass max_class = 0;
  for (const auto& g : corpus) {
    for (TokenClass cls : g.classes()) max_class = std::max(max_class, cls);
  }
  return max_class + 1;
}

std::vector<TokenGrid> base_grids(const std::vector<TokenGrid>& decoded, const Vocabulary& vocab) {
  std::vector<TokenGrid> out;
  out.reserve(decoded.size());
  for (const auto& g : decoded) {
    const TokenGrid base = expand_to_base(g, vocab);
    out.push_back(TokenGrid::from_classes(base.dims(), base.classes(), vocab.base_size()));
  }
  return out;
}

bool same_classes(const std::vector<TokenGrid>& a, const std::vector<TokenGrid>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].dims() != b[i].dims() ||
        !std::equal(a[i].classes().begin(), a[i].classes().end(), b[i].classes().begin())) {
      return false;
    }
  }
  return true;
}

json report_json(const CompressionReport& r) {
  return {{"sequences", r.lengths.size()},
          {"total_tokens", r.total_tokens},
          {"total_cells", r.total_cells},
          {"compression", r.ratio},
          {"mean_length", r.mean_length},
          {"max_length", r.max_length}};
}

struct TrainArgs {
  std::string corpus, out, axes = "all";
  std::size_t extra_tokens = 0;
  long base_size = -1;
};

int cmd_train(const TrainArgs& a, const Common& c) {
  const auto corpus = read_grids_any(read_file(a.corpus));
  if (corpus.empty()) throw Error(ErrorCategory::kInvalidArgument, "corpus is empty");
  const TokenClass base = a.base_size >= 0 ? static_cast<TokenClass>(a.base_size)
                                           : infer_base_size(corpus);
  TrainConfig config{a.extra_tokens, parse_axes(a.axes), c.threads};
  log(c, "training on " + std::to_string(corpus.size()) + " grids, base size " +
             std::to_string(base) + ", threads " + std::to_string(c.threads));
  const std::size_t ndim = corpus.front().dims().ndim();
  json merges = json::array();
  const auto result = train(corpus, base, config, [&](const MergeStep& s) {
    const double ratio = static_cast<double>(s.instances_after) / static_cast<double>(s.total_cells);
    log(c, "merge " + std::to_string(s.rule.new_class) + " = " +
               to_string(s.rule.constellation, ndim) + " count " + std::to_string(s.count) +
               " applied " + std::to_string(s.merges_applied) + " compression " +
               percent(ratio));
    merges.push_back({{"new_class", s.rule.new_class},
                      {"constellation", to_string(s.rule.constellation, ndim)},
                      {"count", s.count},
                      {"applied", s.merges_applied},
                      {"compression", ratio}});
  });
  write_file(a.out, write_vocab(result.vocab));
  if (result.steps.size() < a.extra_tokens) {
    log(c, "stopped early after " + std::to_string(result.steps.size()) +
               " merges: no constellation occurs more than once");
  }
  std::uint64_t cells = 0, instances = 0;
  for (const auto& g : result.grids) {
    cells += g.cell_count();
    instances += g.instance_count();
  }
  log(c, "training-set compression " +
             percent(static_cast<double>(instances) / static_cast<double>(cells)));
  emit_json(c, {{"command", "train"},
                {"base_size", base},
                {"vocab_size", result.vocab.size()},
                {"merges", merges},
                {"train_compression", static_cast<double>(instances) / static_cast<double>(cells)}});
  return 0;
}

struct CodecArgs {
  std::string vocab, in, out, axes = "all";
  bool verify = false;
};

int cmd_encode(const CodecArgs& a, const Common& c) {
  const Vocabulary vocab = read_vocab(read_file(a.vocab));
  const auto corpus = read_grids_any(read_file(a.in));
  const auto seqs = compress(corpus, vocab, parse_axes(a.axes), c.threads);
  write_file(a.out, write_sequence_corpus(seqs));
  if (a.verify && !same_classes(base_grids(decompress(seqs, vocab), vocab), corpus)) {
    log(c, "verify failed: decoded grids differ from the input");
    return 3;
  }
  const auto report = compression_stats(seqs);
  log(c, "encoded " + std::to_string(seqs.size()) + " grids, compression " +
             percent(report.ratio));
  json summary = report_json(report);
  summary["command"] = "encode";
  summary["verified"] = a.verify;
  emit_json(c, summary);
  return 0;
}

int cmd_decode(const CodecArgs& a, const Common& c) {
  const Vocabulary vocab = read_vocab(read_file(a.vocab));
  const auto seqs = read_sequences_any(read_file(a.in));
  const auto grids = base_grids(decompress(seqs, vocab), vocab);
  write_file(a.out, write_grid_corpus(grids));
  if (a.verify && compress(grids, vocab, parse_axes(a.axes), c.threads) != seqs) {
    log(c, "verify failed: re-encoding does not reproduce the input sequences");
    return 3;
  }
  log(c, "decoded " + std::to_string(grids.size()) + " sequences");
  emit_json(c, {{"command", "decode"}, {"grids", grids.size()}, {"verified", a.verify}});
  return 0;
}

struct StatsArgs {
  std::string vocab, in, axes = "all";
};

int cmd_stats(const StatsArgs& a, const Common& c) {
  const Vocabulary vocab = read_vocab(read_file(a.vocab));
  const std::string bytes = read_file(a.in);
  CompressionReport report;
  if (bytes.size() >= 4 && (bytes.compare(0, 4, "MDSQ") == 0 || bytes.compare(0, 4, "MDSC") == 0)) {
    const auto seqs = read_sequences_any(bytes);
    for (const auto& s : seqs) decode(s, vocab);
    report = compression_stats(seqs);
  } else {
    report = compression_stats(read_grids_any(bytes), vocab, parse_axes(a.axes), c.threads);
  }
  std::cout << "sequences: " << report.lengths.size() << '\n'
            << "total tokens: " << report.total_tokens << '\n'
            << "total cells: " << report.total_cells << '\n'
            << "mean length: " << report.mean_length << '\n'
            << "max length: " << report.max_length << '\n'
            << "compression: " << percent(report.ratio) << '\n';
  if (c.json_out) {
    json summary = report_json(report);
    summary["command"] = "stats";
    json hist = json::object();
    for (const auto& [len, n] : report.histogram) hist[std::to_string(len)] = n;
    summary["histogram"] = hist;
    std::cout << summary.dump(2) << '\n';
  }
  return 0;
}

struct CollapseArgs {
  std::string codebook, out_map, corpus, corpus_out;
  std::size_t k = 0;
  std::size_t max_iters = 100;
  double tol = 1e-6;
};

int cmd_collapse(const CollapseArgs& a, const Common& c) {
  const Codebook cb = read_codebook(read_file(a.codebook));
  const CollapseMap map = collapse_codebook(cb, a.k, a.max_iters, a.tol);
  write_file(a.out_map, write_collapse_map(map));
  std::vector<TokenClass> used(map.assign.begin(), map.assign.end());
  std::sort(used.begin(), used.end());
  used.erase(std::unique(used.begin(), used.end()), used.end());
  log(c, "collapsed " + std::to_string(cb.size()) + " entries to " + std::to_string(map.k) +
             " centers (" + std::to_string(used.size()) + " used)");
  if (!a.corpus.empty()) {
    if (a.corpus_out.empty()) {
      throw Error(ErrorCategory::kInvalidArgument, "--corpus needs --corpus-out");
    }
    const auto snapped = snap(read_grids_any(read_file(a.corpus)), map);
    write_file(a.corpus_out, write_grid_corpus(snapped));
    log(c, "snapped " + std::to_string(snapped.size()) + " grids");
  }
  emit_json(c, {{"command", "collapse"}, {"k", map.k}, {"codebook_size", cb.size()},
                {"centers_used", used.size()}});
  return 0;
}

struct PruneArgs {
  std::string in, out;
  double fraction = 0.05;
};

int cmd_prune(const PruneArgs& a, const Common& c) {
  const auto seqs = read_sequences_any(read_file(a.in));
  const auto kept = prune(seqs, a.fraction);
  write_file(a.out, write_sequence_corpus(kept));
  std::size_t max_len = 0;
  for (const auto& s : kept) max_len = std::max(max_len, s.tokens.size());
  log(c, "kept " + std::to_string(kept.size()) + " of " + std::to_string(seqs.size()) +
             " sequences, max length " + std::to_string(max_len));
  emit_json(c, {{"command", "prune"}, {"kept", kept.size()}, {"dropped", seqs.size() - kept.size()},
                {"max_length", max_len}});
  return 0;
}

struct FeaturesArgs {
  std::string vocab, in, out;
  std::size_t pe_dim = 16;
  double base = 10000.0;
};

int cmd_features(const FeaturesArgs& a, const Common& c) {
  const Vocabulary vocab = read_vocab(read_file(a.vocab));
  const auto seqs = read_sequences_any(read_file(a.in));
  const PositionalEncoding pe(vocab.ndim(), a.pe_dim, a.base);
  std::string out;
  std::size_t tokens = 0;
  for (const auto& s : seqs) {
    const auto f = emit_features(s, vocab, pe);
    tokens += f.size();
    out += write_features(f, pe.width());
  }
  write_file(a.out, out);
  log(c, "wrote features for " + std::to_string(seqs.size()) + " sequences, width " +
             std::to_string(pe.width()));
  emit_json(c, {{"command", "features"}, {"sequences", seqs.size()}, {"tokens", tokens},
                {"width", pe.width()}});
  return 0;
}

struct IngestArgs {
  std::vector<std::string> inputs;
  std::string out, mode = "greyscale";
  std::uint32_t divisor = 26;
  TokenClass base_size = 0;
};

int cmd_ingest(const IngestArgs& a, const Common& c) {
  IngestSpec spec{parse_ingest_mode(a.mode), a.divisor, a.base_size};
  spec.validate();
  std::vector<TokenGrid> grids;
  for (const auto& path : a.inputs) {
    const std::string bytes = read_file(path);
    if (bytes.size() >= 4 && bytes.compare(0, 4, "MDTC") == 0) {
      for (auto& g : read_grid_corpus(bytes)) {
        grids.push_back(ingest_bytes(write_grid(g), spec));
      }
    } else {
      grids.push_back(ingest_bytes(bytes, spec));
    }
  }
  write_file(a.out, write_grid_corpus(grids));
  log(c, "ingested " + std::to_string(grids.size()) + " grids, base size " +
             std::to_string(spec.base_size()));
  emit_json(c, {{"command", "ingest"}, {"grids", grids.size()}, {"base_size", spec.base_size()}});
  return 0;
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--threads", c.threads, "worker threads (default: MDBPE_THREADS or 1)")
      ->check(CLI::PositiveNumber);
  sub->add_flag("--json", c.json_out, "print a JSON summary on stdout");
  sub->add_flag("-q,--quiet", c.quiet, "no progress log on stderr");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multidimensional byte pair encoding for token grids"};
  app.require_subcommand(1);
  Common common;
  common.threads = default_threads();

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "learn merge rules from a grid corpus");
  train_cmd->add_option("--corpus", train_args.corpus, "MDTC or MDTG input")->required();
  train_cmd->add_option("--extra-tokens", train_args.extra_tokens, "number of merge rules")
      ->required();
  train_cmd->add_option("--axes", train_args.axes, "all, a mask 1..7, or row,col,depth");
  train_cmd->add_option("--base-size", train_args.base_size,
                        "base vocabulary size (default: max class + 1)");
  train_cmd->add_option("--out", train_args.out, "vocabulary JSON output")->required();
  add_common(train_cmd, common);

  CodecArgs enc_args, dec_args;
  auto* enc_cmd = app.add_subcommand("encode", "grid corpus to token sequences");
  auto* dec_cmd = app.add_subcommand("decode", "token sequences to grid corpus");
  for (auto [cmd, args] : {std::pair{enc_cmd, &enc_args}, std::pair{dec_cmd, &dec_args}}) {
    cmd->add_option("--vocab", args->vocab, "vocabulary JSON")->required();
    cmd->add_option("--in", args->in, "input file")->required();
    cmd->add_option("--out", args->out, "output file")->required();
    cmd->add_option("--axes", args->axes, "neighbor axes used at training time");
    cmd->add_flag("--verify", args->verify, "check the roundtrip");
    add_common(cmd, common);
  }

  StatsArgs stats_args;
  auto* stats_cmd = app.add_subcommand("stats", "compression report");
  stats_cmd->add_option("--vocab", stats_args.vocab, "vocabulary JSON")->required();
  stats_cmd->add_option("--in", stats_args.in, "grid corpus or sequences")->required();
  stats_cmd->add_option("--axes", stats_args.axes, "neighbor axes used at training time");
  add_common(stats_cmd, common);

  CollapseArgs col_args;
  auto* col_cmd = app.add_subcommand("collapse", "cluster a codebook and write the index map");
  col_cmd->add_option("--codebook", col_args.codebook, "MDCB input")->required();
  col_cmd->add_option("--k", col_args.k, "cluster count")->required()->check(CLI::PositiveNumber);
  col_cmd->add_option("--out-map", col_args.out_map, "collapse map JSON")->required();
  col_cmd->add_option("--max-iters", col_args.max_iters, "k-means iteration cap");
  col_cmd->add_option("--tol", col_args.tol, "k-means center shift tolerance");
  col_cmd->add_option("--corpus", col_args.corpus, "grid corpus to snap");
  col_cmd->add_option("--corpus-out", col_args.corpus_out, "snapped grid corpus");
  add_common(col_cmd, common);

  PruneArgs prune_args;
  auto* prune_cmd = app.add_subcommand("prune", "drop the longest sequences");
  prune_cmd->add_option("--in", prune_args.in, "sequence input")->required();
  prune_cmd->add_option("--fraction", prune_args.fraction, "fraction to drop")
      ->check(CLI::Range(0.0, 0.999999));
  prune_cmd->add_option("--out", prune_args.out, "sequence output")->required();
  add_common(prune_cmd, common);

  FeaturesArgs feat_args;
  auto* feat_cmd = app.add_subcommand("features", "per-token positional features");
  feat_cmd->add_option("--vocab", feat_args.vocab, "vocabulary JSON")->required();
  feat_cmd->add_option("--in", feat_args.in, "sequence input")->required();
  feat_cmd->add_option("--pe-dim", feat_args.pe_dim, "encoding width per axis (even)");
  feat_cmd->add_option("--pe-base", feat_args.base, "encoding base period");
  feat_cmd->add_option("--out", feat_args.out, "MDFT output")->required();
  add_common(feat_cmd, common);

  IngestArgs ingest_args;
  auto* ingest_cmd = app.add_subcommand("ingest", "convert images or volumes to a grid corpus");
  ingest_cmd->add_option("inputs", ingest_args.inputs, "PGM/PPM/MDVX/MDTG/MDTC files")
      ->required();
  ingest_cmd->add_option("--mode", ingest_args.mode,
                         "greyscale, quantized-color, voxel-occupancy or raw-indices");
  ingest_cmd->add_option("--divisor", ingest_args.divisor, "color quantization divisor");
  ingest_cmd->add_option("--base-size", ingest_args.base_size, "base size for raw-indices");
  ingest_cmd->add_option("--out", ingest_args.out, "MDTC output")->required();
  add_common(ingest_cmd, common);

  CLI11_PARSE(app, argc, argv);

  try {
    if (train_cmd->parsed()) return cmd_train(train_args, common);
    if (enc_cmd->parsed()) return cmd_encode(enc_args, common);
    if (dec_cmd->parsed()) return cmd_decode(dec_args, common);
    if (stats_cmd->parsed()) return cmd_stats(stats_args, common);
    if (col_cmd->parsed()) return cmd_collapse(col_args, common);
    if (prune_cmd->parsed()) return cmd_prune(prune_args, common);
    if (feat_cmd->parsed()) return cmd_features(feat_args, common);
    if (ingest_cmd->parsed()) return cmd_ingest(ingest_args, common);
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.category()) << "): " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
