#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace cnmt {

using Tokens = std::vector<std::string>;

struct SentencePair {
  Tokens source;
  Tokens target;
};

struct Document {
  std::string id;
  std::vector<SentencePair> sentences;
};

struct Corpus {
  std::vector<Document> documents;

  std::size_t sentence_count() const;
};

enum class Side { Source, Target };

/// Raised for malformed corpus text; names the offending document.
class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Format: `#doc <id>` opens a document, followed by alternating `S: ...` and
/// `T: ...` lines. Blank lines are ignored. Tokens are whitespace-separated.
Corpus parse_corpus(std::istream& in, const std::string& origin = "<stream>");
Corpus load_corpus(const std::string& path);
void write_corpus(std::ostream& out, const Corpus& corpus);
void save_corpus(const std::string& path, const Corpus& corpus);

/// Token <-> id table. Ids 0..2 are reserved for padding, UNK, and
/// end-of-sentence; remaining ids follow descending frequency.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kEos = 2;
  static constexpr std::size_t kReserved = 3;
  static constexpr const char* kPadToken = "<pad>";
  static constexpr const char* kUnkToken = "UNK";
  static constexpr const char* kEosToken = "</s>";

  Vocabulary();
  // Ranked tokens in id order, excluding the reserved entries.
  explicit Vocabulary(const std::vector<std::string>& ranked);

  std::size_t size() const { return tokens_.size(); }
  int id(const std::string& token) const;  // kUnk when absent
  bool contains(const std::string& token) const { return ids_.count(token) != 0; }
  const std::string& token(int id) const;
  static bool reserved(int id) { return id >= 0 && id < static_cast<int>(kReserved); }

  // Appends kEos.
  std::vector<int> encode(const Tokens& tokens) const;
  // Stops at the first kEos.
  Tokens decode(const std::vector<int>& ids) const;

  std::string serialize() const;
  static Vocabulary deserialize(const std::string& text);
  std::string digest() const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

/// Keeps the `cap` entries (reserved ids included) ranked by frequency, ties
/// broken lexicographically. Everything else maps to UNK.
Vocabulary build_vocab(const Corpus& corpus, Side side, std::size_t cap);

/// Target tokens never admitted to the dynamic cache. UNK and punctuation are
/// always members, whatever the file says.
class StopWordList {
 public:
  StopWordList();  // punctuation + UNK only
  static StopWordList load(const std::string& path);
  static StopWordList english_default();
  static const std::vector<std::string>& punctuation();

  void add(const std::string& token) { words_.insert(token); }
  bool contains(const std::string& token) const { return words_.count(token) != 0; }
  const std::set<std::string>& words() const { return words_; }
  // Per-id exclusion mask over a vocabulary; reserved ids are always excluded.
  std::vector<bool> mask(const Vocabulary& vocab) const;

 private:
  std::set<std::string> words_;
};

struct SentenceRef {
  std::size_t doc = 0;
  std::size_t index = 0;
  bool operator==(const SentenceRef&) const = default;
};

struct BatchPlan {
  std::vector<std::vector<SentenceRef>> batches;
  std::size_t skipped_too_long = 0;
};

/// Partitions the corpus into batches. Sentences whose source or target side
/// exceeds max_len tokens are left out and counted. With shuffle the order is
/// a seeded permutation of sentences; otherwise document order.
BatchPlan make_batches(const Corpus& corpus, std::size_t batch_size, std::size_t max_len,
                       bool shuffle = false, std::uint64_t seed = 0);

/// Every sentence in document order.
std::vector<SentenceRef> document_order(const Corpus& corpus);

struct EncodedPair {
  std::vector<int> source;  // ends with kEos
  std::vector<int> target;  // ends with kEos
};

using EncodedCorpus = std::vector<std::vector<EncodedPair>>;

EncodedCorpus encode_corpus(const Corpus& corpus, const Vocabulary& src, const Vocabulary& tgt);

/// Side-specific token lists of each document, concatenated over sentences.
std::vector<Tokens> document_tokens(const Corpus& corpus, Side side,
                                    const StopWordList* drop = nullptr);

}  // namespace cnmt
