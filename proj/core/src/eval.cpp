#include "skbf/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>
#include <thread>

#include "skbf/errors.hpp"
#include "skbf/io.hpp"

namespace skbf {

using json = nlohmann::json;

namespace {

std::size_t hits_in_top(std::span<const NodeId> ranked, const NodeSet& gold, std::size_t k) {
  const std::size_t n = std::min(k, ranked.size());
  std::size_t hits = 0;
  std::set<NodeId> seen;
  for (std::size_t i = 0; i < n; ++i) {
    if (gold.contains(ranked[i]) && seen.insert(ranked[i]).second) ++hits;
  }
  return hits;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string trace_file_name(std::string_view id) {
  std::string out;
  for (char c : id) {
    const bool keep = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                      c == '-' || c == '_' || c == '.';
    out.push_back(keep ? c : '_');
  }
  return out + ".json";
}

void accumulate(Metrics& into, const Metrics& m) {
  into.queries += 1;
  into.hit_at_1 += m.hit_at_1;
  into.hit_at_5 += m.hit_at_5;
  into.recall_at_20 += m.recall_at_20;
  into.mrr += m.mrr;
}

void finish_mean(Metrics& m) {
  if (m.queries == 0) return;
  const auto n = static_cast<double>(m.queries);
  m.hit_at_1 /= n;
  m.hit_at_5 /= n;
  m.recall_at_20 /= n;
  m.mrr /= n;
}

json metrics_json(const Metrics& m) {
  return {{"queries", m.queries},
          {"hit@1", m.hit_at_1},
          {"hit@5", m.hit_at_5},
          {"recall@20", m.recall_at_20},
          {"mrr", m.mrr}};
}

}  // namespace

std::vector<QARecord> parse_dataset(std::istream& in, const SemiStructuredKB* skb) {
  std::vector<QARecord> out;
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto fail = [line_no](const std::string& what) {
      return DatasetError("dataset line " + std::to_string(line_no) + ": " + what);
    };
    QARecord r;
    try {
      const json j = json::parse(line);
      const json& id = j.at("id");
      r.id = id.is_string() ? id.get<std::string>() : id.dump();
      r.query = j.at("query").get<std::string>();
      for (const auto& a : j.at("answer_ids")) {
        r.gold.insert(NodeId(a.is_string() ? a.get<std::string>() : a.dump()));
      }
      r.split = j.value("split", "default");
    } catch (const json::exception& e) {
      throw fail(e.what());
    } catch (const std::invalid_argument& e) {
      throw fail(e.what());
    }
    if (r.id.empty()) throw fail("empty id");
    if (r.query.empty()) throw fail("empty query");
    if (r.gold.empty()) throw fail("answer_ids is empty");
    if (!ids.insert(r.id).second) throw fail("duplicate id '" + r.id + "'");
    if (skb != nullptr) {
      for (const NodeId& g : r.gold) {
        const auto index = skb->find(g);
        if (!index) throw fail("gold node '" + g.str() + "' is not in the knowledge base");
        if (!skb->node(*index).is_candidate)
          throw fail("gold node '" + g.str() + "' is not a candidate");
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<QARecord> load_dataset(const std::string& path, const SemiStructuredKB* skb) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open dataset " + path);
  return parse_dataset(in, skb);
}

double hit_at_k(std::span<const NodeId> ranked, const NodeSet& gold, std::size_t k) {
  if (k == 0) throw std::invalid_argument("hit_at_k needs k >= 1");
  return hits_in_top(ranked, gold, k) > 0 ? 1.0 : 0.0;
}

double recall_at_k(std::span<const NodeId> ranked, const NodeSet& gold, std::size_t k) {
  if (k == 0) throw std::invalid_argument("recall_at_k needs k >= 1");
  if (gold.empty()) throw std::invalid_argument("recall_at_k needs a non-empty gold set");
  return static_cast<double>(hits_in_top(ranked, gold, k)) /
         static_cast<double>(std::min(gold.size(), k));
}

double mrr(std::span<const NodeId> ranked, const NodeSet& gold) {
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    if (gold.contains(ranked[i])) return 1.0 / static_cast<double>(i + 1);
  }
  return 0.0;
}

Metrics score_ranking(std::span<const NodeId> ranked, const NodeSet& gold) {
  return Metrics{1, hit_at_k(ranked, gold, 1), hit_at_k(ranked, gold, 5),
                 recall_at_k(ranked, gold, 20), mrr(ranked, gold)};
}

MetricReport aggregate(std::vector<QueryResult> rows) {
  std::sort(rows.begin(), rows.end(),
            [](const QueryResult& a, const QueryResult& b) { return a.id < b.id; });
  MetricReport report;
  for (const auto& r : rows) {
    accumulate(report.overall, r.metrics);
    accumulate(report.splits[r.split], r.metrics);
  }
  finish_mean(report.overall);
  for (auto& [split, m] : report.splits) finish_mean(m);
  report.rows = std::move(rows);
  return report;
}

std::vector<QARecord> sample_dataset(const std::vector<QARecord>& dataset, double fraction,
                                     std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw std::invalid_argument("sample fraction must be in (0, 1]");
  if (fraction == 1.0 || dataset.empty()) return dataset;
  const auto keep = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(dataset.size()))));

  std::vector<std::pair<std::uint64_t, std::size_t>> keyed;
  keyed.reserve(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    keyed.emplace_back(splitmix64(seed ^ fnv1a(dataset[i].id)), i);
  }
  std::sort(keyed.begin(), keyed.end());
  keyed.resize(keep);
  std::sort(keyed.begin(), keyed.end(),
            [](const auto& a, const auto& b) { return a.second < b.second; });

  std::vector<QARecord> out;
  out.reserve(keep);
  for (const auto& [key, i] : keyed) out.push_back(dataset[i]);
  return out;
}

MetricReport evaluate(const Retrieval& retrieval, LLMGateway& gateway, const PipelineConfig& config,
                      const std::vector<QARecord>& dataset, const EvalOptions& options) {
  if (dataset.empty()) throw std::invalid_argument("evaluate needs a non-empty dataset");
  const std::vector<QARecord> records =
      sample_dataset(dataset, options.sample_fraction, options.seed);

  std::vector<QueryResult> rows(records.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < records.size(); i = next.fetch_add(1)) {
      const QARecord& rec = records[i];
      QueryResult& row = rows[i];
      row.id = rec.id;
      row.split = rec.split;
      try {
        Answer a = answer(retrieval, gateway, config, rec.query);
        for (const auto& e : a.answers.entries) row.ranked.push_back(e.node);
        row.metrics = score_ranking(row.ranked, rec.gold);
        row.fallback = std::string(to_string(a.trace.fallback));
        if (!options.trace_dir.empty()) {
          io::write_file_atomic(
              options.trace_dir + "/" + trace_file_name(rec.id),
              serialize_trace(a.trace, TraceWriteOptions{options.trace_timings, 2}));
        }
      } catch (const std::exception& e) {
        row.metrics = Metrics{1, 0.0, 0.0, 0.0, 0.0};
        if (const auto* err = dynamic_cast<const Error*>(&e)) {
          row.error = err->module() + ": " + e.what();
        } else {
          row.error = e.what();
        }
      }
    }
  };

  const std::size_t threads = std::clamp<std::size_t>(options.parallel, 1, records.size());
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  return aggregate(std::move(rows));
}

std::string report_csv(const MetricReport& report) {
  std::string out = "split,queries,hit@1,hit@5,recall@20,mrr\n";
  auto row = [&out](const std::string& name, const Metrics& m) {
    char buf[160];
    std::snprintf(buf, sizeof buf, ",%zu,%.6f,%.6f,%.6f,%.6f\n", m.queries, m.hit_at_1, m.hit_at_5,
                  m.recall_at_20, m.mrr);
    out += name;
    out += buf;
  };
  for (const auto& [split, m] : report.splits) row(split, m);
  row("overall", report.overall);
  return out;
}

json report_json(const MetricReport& report) {
  json splits = json::object();
  for (const auto& [split, m] : report.splits) splits[split] = metrics_json(m);
  json rows = json::array();
  for (const auto& r : report.rows) {
    json ranked = json::array();
    for (const auto& id : r.ranked) ranked.push_back(id.str());
    json row = metrics_json(r.metrics);
    row.erase("queries");
    row["id"] = r.id;
    row["split"] = r.split;
    row["ranked"] = ranked;
    row["fallback"] = r.fallback;
    if (!r.error.empty()) row["error"] = r.error;
    rows.push_back(std::move(row));
  }
  return {{"overall", metrics_json(report.overall)}, {"splits", splits}, {"queries", rows}};
}

}  // namespace skbf
