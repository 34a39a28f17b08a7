#include "tabxfer/llm_adapter.hpp"

#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "tabxfer/error.hpp"
#include "tabxfer/kv.hpp"
#include "tabxfer/text.hpp"

namespace tabxfer {
namespace {

constexpr std::size_t kQueryDescriptionTokens = 12;
constexpr std::size_t kQueryFeatureTokens = 8;
constexpr double kHintOverlapFloor = 0.5;

struct Endpoint {
  std::string origin;  // scheme://host:port
  std::string path;
};

Endpoint split_endpoint(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) {
    raise(ErrorCode::InvalidConfig, "endpoint '" + url + "' is not an absolute http URL");
  }
  const auto slash = url.find('/', scheme + 3);
  Endpoint e;
  e.origin = url.substr(0, slash);
  e.path = slash == std::string::npos ? "/" : url.substr(slash);
  return e;
}

// Greedy one-to-one selection by confidence, then names, so no source or
// target name is used twice.
std::vector<HintPair> one_to_one(std::vector<HintPair> candidates) {
  std::sort(candidates.begin(), candidates.end(), [](const HintPair& a, const HintPair& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    if (a.source != b.source) return a.source < b.source;
    return a.target < b.target;
  });
  std::set<std::string> used_source, used_target;
  std::vector<HintPair> out;
  for (auto& c : candidates) {
    if (used_source.count(c.source) || used_target.count(c.target)) continue;
    used_source.insert(c.source);
    used_target.insert(c.target);
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<HintPair> overlap_pairs(const std::vector<std::string>& source,
                                    const std::vector<std::string>& target) {
  std::vector<HintPair> candidates;
  for (const auto& s : source) {
    for (const auto& t : target) {
      const double overlap = name_overlap(s, t);
      if (overlap >= kHintOverlapFloor) candidates.push_back({s, t, overlap});
    }
  }
  return one_to_one(std::move(candidates));
}

std::string join_names(const std::vector<std::string>& names) {
  std::string out;
  for (std::size_t i = 0; i < names.size(); ++i) out += (i ? ", " : "") + names[i];
  return out;
}

Completion post_with_retries(const std::string& body, const RemoteSettings& settings,
                             const std::string& response_field, Transcript* transcript,
                             nlohmann::json* raw_out) {
  settings.validate();
  const Endpoint ep = split_endpoint(settings.endpoint);
  Completion result;
  for (int attempt = 1; attempt <= settings.max_attempts; ++attempt) {
    if (attempt > 1) {
      const double delay =
          settings.backoff_base_ms * std::pow(settings.backoff_factor, attempt - 2);
      std::this_thread::sleep_for(std::chrono::milliseconds(static_cast<long long>(delay)));
    }
    AttemptRecord record{attempt, false, ""};
    httplib::Client client(ep.origin);
    const auto timeout = std::chrono::milliseconds(settings.timeout_ms);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    auto res = client.Post(ep.path, body, "application/json");
    if (!res) {
      record.detail = "transport error: " + httplib::to_string(res.error());
    } else if (res->status != 200) {
      record.detail = "http status " + std::to_string(res->status);
    } else {
      auto parsed = nlohmann::json::parse(res->body, nullptr, false);
      if (parsed.is_discarded() || !parsed.is_object() || !parsed.contains(response_field)) {
        record.detail = "malformed response body";
      } else if (response_field == "completion" && !parsed[response_field].is_string()) {
        record.detail = "malformed response body";
      } else {
        record.ok = true;
        record.detail = "ok";
        if (response_field == "completion") result.text = parsed[response_field].get<std::string>();
        if (raw_out) *raw_out = std::move(parsed);
      }
    }
    if (transcript) {
      transcript->append("attempt", std::to_string(attempt) + " " + record.detail);
    }
    result.attempts.push_back(record);
    if (record.ok) return result;
  }
  throw AdapterFailure("remote endpoint " + settings.endpoint + " failed after " +
                           std::to_string(settings.max_attempts) + " attempts: " +
                           result.attempts.back().detail,
                       result.attempts);
}

}  // namespace

std::string to_string(AdapterKind kind) { return kind == AdapterKind::Stub ? "stub" : "remote"; }

AdapterKind parse_adapter_kind(std::string_view text) {
  if (text == "stub") return AdapterKind::Stub;
  if (text == "remote") return AdapterKind::Remote;
  raise(ErrorCode::InvalidConfig, "unknown adapter kind '" + std::string(text) + "'");
}

void RemoteSettings::validate() const {
  if (endpoint.empty()) raise(ErrorCode::InvalidConfig, "remote adapter endpoint is not configured");
  if (max_attempts < 1 || max_attempts > kMaxAdapterAttempts) {
    raise(ErrorCode::InvalidConfig, "adapter max_attempts must be in [1, 5]");
  }
  if (timeout_ms <= 0 || backoff_base_ms < 0 || backoff_factor < 1.0 || max_in_flight < 1 ||
      max_in_flight > 64) {
    raise(ErrorCode::InvalidConfig, "invalid remote adapter timing settings");
  }
}

Transcript::Transcript(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  std::ofstream(path_, std::ios::trunc);
}

void Transcript::append(std::string_view kind, std::string_view text) {
  if (path_.empty()) return;
  std::lock_guard lock(mutex_);
  std::ofstream out(path_, std::ios::app);
  out << "--- " << kind << "\n" << text << "\n";
}

double name_overlap(std::string_view a, std::string_view b) {
  const auto ta = tokenize(a);
  const auto tb = tokenize(b);
  const std::set<std::string> sa(ta.begin(), ta.end());
  const std::set<std::string> sb(tb.begin(), tb.end());
  if (sa.empty() || sb.empty()) return 0.0;
  std::size_t shared = 0;
  for (const auto& t : sa) shared += sb.count(t);
  const std::size_t unioned = sa.size() + sb.size() - shared;
  return static_cast<double>(shared) / static_cast<double>(unioned);
}

std::string stub_generate_query(const DatasetCard& card) {
  std::map<std::string, std::size_t> tf;
  for (auto& t : tokenize(card.description)) {
    if (!is_stop_word(t)) ++tf[std::move(t)];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(tf.begin(), tf.end());
  // map order is alphabetical, so a stable sort on count keeps ties alphabetical
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> parts;
  for (std::size_t i = 0; i < ranked.size() && i < kQueryDescriptionTokens; ++i) {
    parts.push_back(ranked[i].first);
  }
  std::vector<std::string> feature_tokens;
  for (const auto& name : card.feature_names) {
    for (auto& t : tokenize(name)) {
      if (feature_tokens.size() == kQueryFeatureTokens) break;
      if (is_stop_word(t)) continue;
      if (std::find(feature_tokens.begin(), feature_tokens.end(), t) == feature_tokens.end()) {
        feature_tokens.push_back(std::move(t));
      }
    }
  }
  parts.insert(parts.end(), feature_tokens.begin(), feature_tokens.end());
  for (const auto& label : card.class_labels) {
    if (!label.empty()) parts.push_back(label);
  }
  std::string query;
  for (const auto& p : parts) {
    if (!query.empty()) query.push_back(' ');
    query += p;
  }
  return query;
}

MappingHints stub_mapping_hints(const DatasetCard& source, const DatasetCard& target) {
  MappingHints hints;
  hints.provenance = AdapterKind::Stub;
  hints.pairs = overlap_pairs(source.feature_names, target.feature_names);
  hints.class_pairs = overlap_pairs(source.class_labels, target.class_labels);
  return hints;
}

std::string StubAdapter::generate_query(const DatasetCard& card) const {
  std::string q = stub_generate_query(card);
  if (transcript_) transcript_->append("stub query " + card.id, q);
  return q;
}

MappingHints StubAdapter::mapping_hints(const DatasetCard& source, const DatasetCard& target) const {
  return stub_mapping_hints(source, target);
}

Completion remote_complete(const std::string& prompt, const RemoteSettings& settings,
                           Transcript* transcript) {
  if (transcript) transcript->append("prompt", prompt);
  const nlohmann::json body = {{"model", settings.model}, {"prompt", prompt}};
  Completion c = post_with_retries(body.dump(), settings, "completion", transcript, nullptr);
  if (transcript) transcript->append("response", c.text);
  return c;
}

MappingHints parse_hint_response(std::string_view text, const DatasetCard& source,
                                 const DatasetCard& target) {
  MappingHints hints;
  hints.provenance = AdapterKind::Remote;
  std::vector<HintPair> pairs, class_pairs;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    std::string body = trim(line);
    bool is_class = false;
    if (body.rfind("class:", 0) == 0) {
      is_class = true;
      body = trim(std::string_view(body).substr(6));
    }
    const auto arrow = body.find("->");
    if (arrow == std::string::npos) continue;
    const std::string lhs = trim(std::string_view(body).substr(0, arrow));
    std::string rhs = trim(std::string_view(body).substr(arrow + 2));
    double confidence = 1.0;
    const auto colon = rhs.rfind(':');
    if (colon != std::string::npos) {
      try {
        confidence = std::stod(rhs.substr(colon + 1));
      } catch (...) {
        continue;
      }
      rhs = trim(std::string_view(rhs).substr(0, colon));
    }
    if (!(confidence >= 0.0 && confidence <= 1.0)) continue;
    const auto& src_names = is_class ? source.class_labels : source.feature_names;
    const auto& tgt_names = is_class ? target.class_labels : target.feature_names;
    const bool known = std::find(src_names.begin(), src_names.end(), lhs) != src_names.end() &&
                       std::find(tgt_names.begin(), tgt_names.end(), rhs) != tgt_names.end();
    if (!known) continue;
    (is_class ? class_pairs : pairs).push_back({lhs, rhs, confidence});
  }
  hints.pairs = one_to_one(std::move(pairs));
  hints.class_pairs = one_to_one(std::move(class_pairs));
  return hints;
}

std::string query_prompt(const DatasetCard& card) {
  std::ostringstream os;
  os << "Write one line of search keywords for finding public tabular datasets that could serve "
        "as a source for transfer learning to the dataset below. Reply with the keywords only.\n"
     << "Description: " << card.description << "\n"
     << "Features: " << join_names(card.feature_names) << "\n"
     << "Classes: " << join_names(card.class_labels) << "\n";
  return os.str();
}

std::string hint_prompt(const DatasetCard& source, const DatasetCard& target) {
  std::ostringstream os;
  os << "Pair features of a source dataset with features of a target dataset that measure the same "
        "quantity. Reply with one line per pair formatted 'source -> target : confidence' with "
        "confidence in [0,1]. Pair class labels the same way with lines prefixed 'class:'.\n"
     << "Source: " << source.description << "\n"
     << "Source features: " << join_names(source.feature_names) << "\n"
     << "Source classes: " << join_names(source.class_labels) << "\n"
     << "Target: " << target.description << "\n"
     << "Target features: " << join_names(target.feature_names) << "\n"
     << "Target classes: " << join_names(target.class_labels) << "\n";
  return os.str();
}

RemoteAdapter::RemoteAdapter(RemoteSettings settings, Transcript* transcript)
    : settings_(std::move(settings)), transcript_(transcript) {
  settings_.validate();
  in_flight_ = std::make_unique<std::counting_semaphore<64>>(settings_.max_in_flight);
}

Completion RemoteAdapter::complete(const std::string& prompt) const {
  in_flight_->acquire();
  struct Release {
    std::counting_semaphore<64>* s;
    ~Release() { s->release(); }
  } release{in_flight_.get()};
  return remote_complete(prompt, settings_, transcript_);
}

std::string RemoteAdapter::generate_query(const DatasetCard& card) const {
  std::string q = trim(complete(query_prompt(card)).text);
  // an empty completion is unusable as a query
  if (q.empty()) throw AdapterFailure("remote adapter returned an empty query", {});
  return q;
}

MappingHints RemoteAdapter::mapping_hints(const DatasetCard& source, const DatasetCard& target) const {
  return parse_hint_response(complete(hint_prompt(source, target)).text, source, target);
}

RemoteEmbedder::RemoteEmbedder(RemoteSettings settings, std::size_t dimension, Transcript* transcript)
    : settings_(std::move(settings)), dimension_(dimension), transcript_(transcript) {
  settings_.validate();
  if (dimension_ == 0) raise(ErrorCode::InvalidArgument, "embedding dimension must be positive");
}

EmbeddingVector RemoteEmbedder::embed(std::string_view text) const {
  const nlohmann::json body = {{"model", settings_.model}, {"text", std::string(text)}};
  nlohmann::json raw;
  Completion c = post_with_retries(body.dump(), settings_, "embedding", transcript_, &raw);
  const auto& arr = raw["embedding"];
  if (!arr.is_array() || arr.size() != dimension_) {
    throw AdapterFailure("remote embedder returned " +
                             std::to_string(arr.is_array() ? arr.size() : 0) +
                             " values, expected " + std::to_string(dimension_),
                         c.attempts);
  }
  std::vector<double> values;
  values.reserve(dimension_);
  for (const auto& v : arr) {
    if (!v.is_number() || !std::isfinite(v.get<double>())) {
      throw AdapterFailure("remote embedder returned a non-numeric value", c.attempts);
    }
    values.push_back(v.get<double>());
  }
  return EmbeddingVector::from_values(std::move(values));
}

std::string RemoteEmbedder::tag() const { return "remote:" + settings_.model; }

}  // namespace tabxfer
