#include "adnfm/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

#include "adnfm/errors.hpp"

namespace adnfm {

std::string_view to_string(FieldKind kind) {
  switch (kind) {
    case FieldKind::kCategorical:
      return "categorical";
    case FieldKind::kNumeric:
      return "numeric";
    case FieldKind::kMultiCategorical:
      return "multi_categorical";
  }
  return "unknown";
}

FieldKind field_kind_from_string(std::string_view name) {
  if (name == "categorical") return FieldKind::kCategorical;
  if (name == "numeric") return FieldKind::kNumeric;
  if (name == "multi_categorical") return FieldKind::kMultiCategorical;
  throw ConfigError("unknown field kind '" + std::string(name) + "'");
}

FeatureSchema::FeatureSchema(std::vector<FieldSpec> fields) : fields_(std::move(fields)) {
  std::set<std::string> names;
  std::uint32_t next = 0;
  lookup_.resize(fields_.size());
  for (std::size_t f = 0; f < fields_.size(); ++f) {
    const FieldSpec& spec = fields_[f];
    if (!names.insert(spec.name).second) throw ConfigError("duplicate field name '" + spec.name + "'");
    if (spec.cardinality < 2) throw ConfigError("field '" + spec.name + "' has cardinality < 2");
    if (spec.offset != next) throw ConfigError("field '" + spec.name + "' offset breaks the partition");
    if (spec.kind == FieldKind::kNumeric) {
      if (spec.cardinality != kNumericBuckets || !spec.vocabulary.empty()) {
        throw ConfigError("numeric field '" + spec.name + "' must have 32 buckets and no vocabulary");
      }
    } else {
      if (spec.vocabulary.size() + 1 != spec.cardinality) {
        throw ConfigError("field '" + spec.name + "' vocabulary size disagrees with cardinality");
      }
      for (std::uint32_t k = 0; k < spec.vocabulary.size(); ++k) {
        if (!lookup_[f].emplace(spec.vocabulary[k], k + 1).second) {
          throw ConfigError("field '" + spec.name + "' repeats vocabulary value '" + spec.vocabulary[k] + "'");
        }
      }
    }
    next += spec.cardinality;
  }
  dimension_ = next;
}

std::uint32_t FeatureSchema::lookup(std::size_t f, std::string_view value) const {
  const auto& table = lookup_[f];
  const auto it = table.find(value);
  return it == table.end() ? 0 : it->second;
}

std::size_t FeatureSchema::field_of(std::uint32_t global_index) const {
  if (global_index >= dimension_) throw SchemaMismatch("index " + std::to_string(global_index) + " outside [0, D)");
  const auto it = std::upper_bound(fields_.begin(), fields_.end(), global_index,
                                   [](std::uint32_t idx, const FieldSpec& s) { return idx < s.offset; });
  return static_cast<std::size_t>(it - fields_.begin()) - 1;
}

std::optional<std::string> FeatureSchema::decode(std::uint32_t global_index) const {
  const FieldSpec& spec = fields_[field_of(global_index)];
  const std::uint32_t local = global_index - spec.offset;
  if (local == 0 || spec.kind == FieldKind::kNumeric) return std::nullopt;
  return spec.vocabulary[local - 1];
}

std::string FeatureSchema::fingerprint() const {
  std::ostringstream out;
  out << "fields=" << fields_.size() << " D=" << dimension_ << " cardinalities=";
  for (std::size_t f = 0; f < fields_.size(); ++f) out << (f ? "," : "") << fields_[f].cardinality;
  return out.str();
}

nlohmann::json FeatureSchema::to_json() const {
  nlohmann::json fields = nlohmann::json::array();
  for (const FieldSpec& spec : fields_) {
    fields.push_back({{"name", spec.name},
                      {"kind", to_string(spec.kind)},
                      {"offset", spec.offset},
                      {"cardinality", spec.cardinality},
                      {"vocabulary", spec.vocabulary}});
  }
  return {{"dimension", dimension_}, {"fields", fields}};
}

FeatureSchema FeatureSchema::from_json(const nlohmann::json& doc) {
  try {
    std::vector<FieldSpec> specs;
    for (const auto& f : doc.at("fields")) {
      FieldSpec spec;
      spec.name = f.at("name").get<std::string>();
      spec.kind = field_kind_from_string(f.at("kind").get<std::string>());
      spec.offset = f.at("offset").get<std::uint32_t>();
      spec.cardinality = f.at("cardinality").get<std::uint32_t>();
      spec.vocabulary = f.at("vocabulary").get<std::vector<std::string>>();
      specs.push_back(std::move(spec));
    }
    FeatureSchema schema(std::move(specs));
    if (schema.dimension() != doc.at("dimension").get<std::uint32_t>()) {
      throw ConfigError("schema dimension disagrees with field layout");
    }
    return schema;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed schema document: ") + e.what());
  }
}

std::uint32_t bucketize(std::optional<double> x) {
  if (!x || std::isnan(*x)) return 0;
  const double v = *x;
  if (v < 0.0) return 1;
  if (v <= 1.0) return 2 + static_cast<std::uint32_t>(std::floor(v));
  const double level = std::min(std::floor(std::log2(v)), 28.0);
  return 3 + static_cast<std::uint32_t>(level);
}

std::vector<std::string_view> split_multi_value(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find(kMultiValueSeparator, start), text.size());
    if (end > start) out.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

VocabularyBuilder::VocabularyBuilder(std::vector<FieldDescriptor> descriptors)
    : descriptors_(std::move(descriptors)), counts_(descriptors_.size()) {
  std::set<std::string> names;
  for (const auto& d : descriptors_) {
    if (!names.insert(d.name).second) throw ConfigError("duplicate field name '" + d.name + "'");
  }
}

void VocabularyBuilder::add(std::span<const std::string_view> record) {
  if (record.size() != descriptors_.size()) {
    throw DataError("record has " + std::to_string(record.size()) + " slots, schema expects " +
                    std::to_string(descriptors_.size()));
  }
  auto bump = [](auto& table, std::string_view value) {
    auto it = table.find(value);
    if (it == table.end()) it = table.emplace(std::string(value), 0).first;
    ++it->second;
  };
  for (std::size_t f = 0; f < record.size(); ++f) {
    switch (descriptors_[f].kind) {
      case FieldKind::kNumeric:
        break;
      case FieldKind::kCategorical:
        if (!record[f].empty()) bump(counts_[f], record[f]);
        break;
      case FieldKind::kMultiCategorical:
        for (std::string_view token : split_multi_value(record[f])) bump(counts_[f], token);
        break;
    }
  }
  ++records_;
}

FeatureSchema VocabularyBuilder::build(std::uint32_t min_count) const {
  if (records_ == 0) throw DataError("cannot build a schema from zero records");
  if (min_count < 1) throw ConfigError("min_count must be >= 1");
  std::vector<FieldSpec> specs;
  std::uint32_t offset = 0;
  for (std::size_t f = 0; f < descriptors_.size(); ++f) {
    FieldSpec spec;
    spec.name = descriptors_[f].name;
    spec.kind = descriptors_[f].kind;
    spec.offset = offset;
    if (spec.kind == FieldKind::kNumeric) {
      spec.cardinality = kNumericBuckets;
    } else {
      for (const auto& [value, count] : counts_[f]) {
        if (count >= min_count) spec.vocabulary.push_back(value);
      }
      std::sort(spec.vocabulary.begin(), spec.vocabulary.end());
      spec.cardinality = static_cast<std::uint32_t>(spec.vocabulary.size()) + 1;
      // A field whose values all fall below min_count still needs a real slot;
      // the empty placeholder is unreachable because empty text encodes as missing.
      if (spec.cardinality < 2) {
        spec.vocabulary.emplace_back();
        spec.cardinality = 2;
      }
    }
    offset += spec.cardinality;
    specs.push_back(std::move(spec));
  }
  return FeatureSchema(std::move(specs));
}

FeatureSchema build_schema(const std::vector<FieldDescriptor>& descriptors,
                           const std::vector<std::vector<std::string>>& records,
                           std::uint32_t min_count) {
  VocabularyBuilder builder(descriptors);
  std::vector<std::string_view> views;
  for (const auto& record : records) {
    views.assign(record.begin(), record.end());
    builder.add(views);
  }
  return builder.build(min_count);
}

namespace {

std::optional<double> parse_numeric(std::string_view text, const std::string& field) {
  if (text.empty()) return std::nullopt;
  double value = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw DataError("field '" + field + "': cannot parse '" + std::string(text) + "' as a number");
  }
  return value;
}

}  // namespace

EncodedSample encode(std::span<const std::string_view> record, const FeatureSchema& schema) {
  if (record.size() != schema.num_fields()) {
    throw DataError("record has " + std::to_string(record.size()) + " slots, schema expects " +
                    std::to_string(schema.num_fields()));
  }
  EncodedSample sample;
  sample.field_begin.reserve(schema.num_fields() + 1);
  sample.entries.reserve(schema.num_fields());
  for (std::size_t f = 0; f < schema.num_fields(); ++f) {
    const FieldSpec& spec = schema.field(f);
    sample.field_begin.push_back(static_cast<std::uint32_t>(sample.entries.size()));
    switch (spec.kind) {
      case FieldKind::kNumeric:
        sample.entries.push_back({spec.offset + bucketize(parse_numeric(record[f], spec.name)), 1.0});
        break;
      case FieldKind::kCategorical:
        sample.entries.push_back({spec.offset + (record[f].empty() ? 0 : schema.lookup(f, record[f])), 1.0});
        break;
      case FieldKind::kMultiCategorical: {
        const auto tokens = split_multi_value(record[f]);
        if (tokens.empty()) {
          sample.entries.push_back({spec.offset, 1.0});
          break;
        }
        const double weight = 1.0 / static_cast<double>(tokens.size());
        for (std::string_view token : tokens) {
          sample.entries.push_back({spec.offset + schema.lookup(f, token), weight});
        }
        break;
      }
    }
  }
  sample.field_begin.push_back(static_cast<std::uint32_t>(sample.entries.size()));
  return sample;
}

void validate_sample(SampleView sample, const FeatureSchema& schema) {
  if (sample.num_fields() != schema.num_fields()) {
    throw SchemaMismatch("sample has " + std::to_string(sample.num_fields()) + " fields, schema has " +
                         std::to_string(schema.num_fields()));
  }
  for (std::size_t f = 0; f < schema.num_fields(); ++f) {
    const FieldSpec& spec = schema.field(f);
    const auto entries = sample.field(f);
    if (entries.empty()) throw SchemaMismatch("field '" + spec.name + "' has no entries");
    if (spec.kind != FieldKind::kMultiCategorical && entries.size() != 1) {
      throw SchemaMismatch("single-valued field '" + spec.name + "' has " + std::to_string(entries.size()) + " entries");
    }
    for (const FeatureEntry& e : entries) {
      if (e.index < spec.offset || e.index >= spec.offset + spec.cardinality) {
        throw SchemaMismatch("index " + std::to_string(e.index) + " outside field '" + spec.name + "'");
      }
      if (!(e.weight > 0.0) || !std::isfinite(e.weight)) {
        throw SchemaMismatch("non-positive or non-finite weight in field '" + spec.name + "'");
      }
    }
  }
}

}  // namespace adnfm
