#include "stra/huffman.hpp"

#include <algorithm>
#include <queue>

#include "stra/errors.hpp"
#include "stra/varint.hpp"

namespace stra {

namespace {

// Unused symbols (frequency 0) get length 0 and take no code space.
std::vector<std::uint8_t> plain_lengths(std::span<const std::uint64_t> all) {
  std::vector<std::uint8_t> out(all.size(), 0);
  std::vector<std::size_t> used;
  std::vector<std::uint64_t> freqs;
  for (std::size_t i = 0; i < all.size(); ++i)
    if (all[i]) used.push_back(i), freqs.push_back(all[i]);
  const std::size_t n = freqs.size();
  if (n <= 1) return out;

  // Nodes 0..n-1 are leaves; internal nodes follow. Ties pop the lower id
  // first so the tree shape is deterministic.
  std::vector<std::size_t> up(2 * n - 1, 0);
  using Item = std::pair<std::uint64_t, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  for (std::size_t i = 0; i < n; ++i) heap.emplace(freqs[i], i);
  std::size_t next = n;
  while (heap.size() > 1) {
    const Item a = heap.top();
    heap.pop();
    const Item b = heap.top();
    heap.pop();
    up[a.second] = up[b.second] = next;
    heap.emplace(a.first + b.first, next++);
  }
  const std::size_t root = next - 1;
  std::vector<std::uint32_t> depth(2 * n - 1, 0);
  for (std::size_t i = root; i-- > 0;) depth[i] = depth[up[i]] + 1;
  for (std::size_t i = 0; i < n; ++i) out[used[i]] = static_cast<std::uint8_t>(std::min<std::uint32_t>(depth[i], 255));
  return out;
}

struct Canonical {
  std::vector<std::uint32_t> code;  // per symbol index
};

// Assigns canonical codes: shorter codes first, ties by symbol order.
Canonical assign_codes(std::span<const std::uint8_t> len) {
  const std::size_t n = len.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return len[a] < len[b]; });
  Canonical c{std::vector<std::uint32_t>(n, 0)};
  std::uint32_t code = 0;
  unsigned prev = 0;
  bool first = true;
  for (std::size_t i : order) {
    if (len[i] == 0) continue;
    if (!first) ++code;
    code <<= (len[i] - prev);
    prev = len[i];
    first = false;
    c.code[i] = code;
  }
  return c;
}

class BitWriter {
 public:
  explicit BitWriter(std::vector<std::uint8_t>& out) : out_(out) {}
  void put(std::uint32_t code, unsigned len) {
    acc_ = (acc_ << len) | code;
    fill_ += len;
    while (fill_ >= 8) {
      fill_ -= 8;
      out_.push_back(static_cast<std::uint8_t>(acc_ >> fill_));
    }
  }
  void flush() {
    if (fill_ > 0) out_.push_back(static_cast<std::uint8_t>(acc_ << (8 - fill_)));
    acc_ = 0;
    fill_ = 0;
  }

 private:
  std::vector<std::uint8_t>& out_;
  std::uint64_t acc_ = 0;  // only the low `fill_` bits are pending
  unsigned fill_ = 0;
};

}  // namespace

std::vector<std::uint8_t> huffman_code_lengths(std::span<const std::uint64_t> freqs, unsigned max_length) {
  std::vector<std::uint64_t> f(freqs.begin(), freqs.end());
  for (;;) {
    std::vector<std::uint8_t> len = plain_lengths(f);
    if (len.empty() || *std::max_element(len.begin(), len.end()) <= max_length) return len;
    // Flatten the distribution and retry until the deepest code fits.
    for (auto& v : f) v = v ? (v >> 1) | 1 : 0;
  }
}

std::vector<std::uint8_t> huffman_encode(std::span<const std::int64_t> symbols) {
  std::vector<std::int64_t> alphabet;
  std::vector<std::uint64_t> freqs;
  std::vector<std::uint32_t> index(symbols.size());
  if (!symbols.empty()) {
    const auto [lo, hi] = std::minmax_element(symbols.begin(), symbols.end());
    const std::uint64_t range = static_cast<std::uint64_t>(*hi) - static_cast<std::uint64_t>(*lo);
    if (range < (std::uint64_t{1} << 20)) {
      // Dense histogram over the value range.
      std::vector<std::uint64_t> hist(range + 1, 0);
      for (auto s : symbols) ++hist[static_cast<std::uint64_t>(s - *lo)];
      std::vector<std::uint32_t> slot(range + 1, 0);
      for (std::size_t v = 0; v <= range; ++v) {
        if (!hist[v]) continue;
        slot[v] = static_cast<std::uint32_t>(alphabet.size());
        alphabet.push_back(*lo + static_cast<std::int64_t>(v));
        freqs.push_back(hist[v]);
      }
      for (std::size_t i = 0; i < symbols.size(); ++i)
        index[i] = slot[static_cast<std::uint64_t>(symbols[i] - *lo)];
    } else {
      alphabet.assign(symbols.begin(), symbols.end());
      std::sort(alphabet.begin(), alphabet.end());
      alphabet.erase(std::unique(alphabet.begin(), alphabet.end()), alphabet.end());
      freqs.assign(alphabet.size(), 0);
      for (std::size_t i = 0; i < symbols.size(); ++i) {
        index[i] = static_cast<std::uint32_t>(std::lower_bound(alphabet.begin(), alphabet.end(), symbols[i]) -
                                              alphabet.begin());
        ++freqs[index[i]];
      }
    }
  }
  const std::vector<std::uint8_t> len = huffman_code_lengths(freqs);
  const Canonical canon = assign_codes(len);

  std::vector<std::uint8_t> out;
  put_varint(out, alphabet.size());
  std::int64_t prev = 0;
  for (std::size_t i = 0; i < alphabet.size(); ++i) {
    put_varint(out, zigzag(alphabet[i] - prev));
    prev = alphabet[i];
    out.push_back(len[i]);
  }
  if (alphabet.size() <= 1) return out;

  BitWriter bits(out);
  for (auto idx : index) bits.put(canon.code[idx], len[idx]);
  bits.flush();
  return out;
}

std::vector<std::int64_t> huffman_decode(std::span<const std::uint8_t> bytes, std::size_t count) {
  ByteReader in(bytes);
  const std::uint64_t n = in.varint();
  if (n > bytes.size()) throw FormatError(FormatError::Kind::Framing, "huffman table too large");
  std::vector<std::int64_t> alphabet(n);
  std::vector<std::uint8_t> len(n);
  std::int64_t prev = 0;
  for (std::uint64_t i = 0; i < n; ++i) {
    prev += unzigzag(in.varint());
    alphabet[i] = prev;
    len[i] = in.u8();
    if (len[i] > 32) throw FormatError(FormatError::Kind::Framing, "huffman code too long");
  }
  if (count == 0) return {};
  if (n == 0) throw FormatError(FormatError::Kind::Framing, "empty huffman table");
  if (n == 1) return std::vector<std::int64_t>(count, alphabet[0]);

  // Canonical decode tables: symbols sorted by (length, symbol order).
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return len[a] < len[b]; });
  std::vector<std::uint32_t> count_at(33, 0);
  for (auto l : len) {
    if (l == 0) throw FormatError(FormatError::Kind::Framing, "zero-length code in a multi-symbol table");
    ++count_at[l];
  }
  std::vector<std::uint32_t> first_code(33, 0), first_index(33, 0);
  std::uint32_t code = 0, index = 0;
  for (unsigned l = 1; l <= 32; ++l) {
    code = (code + count_at[l - 1]) << 1;
    if (l == 1) code = 0;
    first_code[l] = code;
    first_index[l] = index;
    index += count_at[l];
  }

  const auto bits = in.take(in.remaining());
  std::vector<std::int64_t> out;
  out.reserve(count);
  std::size_t pos = 0;
  const std::size_t nbits = bits.size() * 8;
  while (out.size() < count) {
    std::uint32_t c = 0;
    unsigned l = 0;
    for (;;) {
      if (pos >= nbits) throw FormatError(FormatError::Kind::Framing, "huffman bits truncated");
      c = (c << 1) | ((bits[pos >> 3] >> (7 - (pos & 7))) & 1);
      ++pos;
      ++l;
      if (l > 32) throw FormatError(FormatError::Kind::Framing, "invalid huffman code");
      if (count_at[l] && c - first_code[l] < count_at[l] && c >= first_code[l]) {
        out.push_back(alphabet[order[first_index[l] + (c - first_code[l])]]);
        break;
      }
    }
  }
  return out;
}

}  // namespace stra
