#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"

namespace adnfm {

enum class FieldKind { kCategorical, kNumeric, kMultiCategorical };

std::string_view to_string(FieldKind kind);
FieldKind field_kind_from_string(std::string_view name);

// Separator between values of a multi-categorical raw field.
inline constexpr char kMultiValueSeparator = '|';
// Every numeric field has this many buckets, bucket 0 being "missing".
inline constexpr std::uint32_t kNumericBuckets = 32;

struct FieldDescriptor {
  std::string name;
  FieldKind kind = FieldKind::kCategorical;
};

struct FieldSpec {
  std::string name;
  FieldKind kind = FieldKind::kCategorical;
  std::uint32_t cardinality = 0;  // including the OOV slot
  std::uint32_t offset = 0;
  // vocabulary[k - 1] is the value encoded at local index k. Empty for numeric fields.
  std::vector<std::string> vocabulary;
};

struct StringHash {
  using is_transparent = void;
  std::size_t operator()(std::string_view s) const { return std::hash<std::string_view>{}(s); }
};

// Field layout of the sparse input space. Field ranges partition [0, D) in
// declaration order and local index 0 of every field is the OOV/missing slot.
class FeatureSchema {
 public:
  FeatureSchema() = default;
  explicit FeatureSchema(std::vector<FieldSpec> fields);

  const std::vector<FieldSpec>& fields() const { return fields_; }
  const FieldSpec& field(std::size_t f) const { return fields_[f]; }
  std::size_t num_fields() const { return fields_.size(); }
  std::uint32_t dimension() const { return dimension_; }

  // Local index of value within a categorical field, 0 when unseen.
  std::uint32_t lookup(std::size_t f, std::string_view value) const;
  // Inverse of encoding for in-vocabulary categorical indices.
  std::optional<std::string> decode(std::uint32_t global_index) const;
  std::size_t field_of(std::uint32_t global_index) const;

  // Short description used in schema-mismatch diagnostics.
  std::string fingerprint() const;

  nlohmann::json to_json() const;
  static FeatureSchema from_json(const nlohmann::json& doc);

  bool operator==(const FeatureSchema& other) const { return fields_ == other.fields_ && dimension_ == other.dimension_; }

 private:
  std::vector<FieldSpec> fields_;
  std::uint32_t dimension_ = 0;
  std::vector<std::unordered_map<std::string, std::uint32_t, StringHash, std::equal_to<>>> lookup_;
};

inline bool operator==(const FieldSpec& a, const FieldSpec& b) {
  return a.name == b.name && a.kind == b.kind && a.cardinality == b.cardinality &&
         a.offset == b.offset && a.vocabulary == b.vocabulary;
}

// Missing -> 0, negative -> 1, [0, 1] -> 2 + floor(x), above 1 -> 3 + min(floor(log2 x), 28).
std::uint32_t bucketize(std::optional<double> x);

// Accumulates value frequencies record by record, then freezes a schema.
class VocabularyBuilder {
 public:
  explicit VocabularyBuilder(std::vector<FieldDescriptor> descriptors);

  // record holds one raw text slot per field; empty text is missing.
  void add(std::span<const std::string_view> record);
  std::size_t records_seen() const { return records_; }

  // Keeps values seen at least min_count times, sorted lexicographically.
  FeatureSchema build(std::uint32_t min_count) const;

 private:
  std::vector<FieldDescriptor> descriptors_;
  std::vector<std::unordered_map<std::string, std::uint64_t, StringHash, std::equal_to<>>> counts_;
  std::size_t records_ = 0;
};

FeatureSchema build_schema(const std::vector<FieldDescriptor>& descriptors,
                           const std::vector<std::vector<std::string>>& records,
                           std::uint32_t min_count);

struct FeatureEntry {
  std::uint32_t index = 0;
  double weight = 0.0;
  bool operator==(const FeatureEntry&) const = default;
};

// Read-only view of one sample's active features, grouped by field:
// entries[field_begin[f] .. field_begin[f + 1]) belong to field f.
struct SampleView {
  std::span<const FeatureEntry> entries;
  std::span<const std::uint32_t> field_begin;

  std::size_t num_fields() const { return field_begin.size() - 1; }
  std::span<const FeatureEntry> field(std::size_t f) const {
    return entries.subspan(field_begin[f], field_begin[f + 1] - field_begin[f]);
  }
};

struct EncodedSample {
  std::vector<FeatureEntry> entries;
  std::vector<std::uint32_t> field_begin;
  double label = 0.0;

  SampleView view() const { return {entries, field_begin}; }
  bool operator==(const EncodedSample&) const = default;
};

// Maps one raw record (one text slot per field) onto the schema's sparse space.
// Throws DataError when the slot count differs from the field count or a
// numeric slot does not parse.
EncodedSample encode(std::span<const std::string_view> record, const FeatureSchema& schema);

// Throws SchemaMismatch unless every field has entries inside its own range with
// positive finite weights (exactly one entry for single-valued fields).
void validate_sample(SampleView sample, const FeatureSchema& schema);

std::vector<std::string_view> split_multi_value(std::string_view text);

}  // namespace adnfm
