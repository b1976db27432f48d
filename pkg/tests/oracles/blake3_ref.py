"""Pure-Python BLAKE3, used only as a test oracle.

Written from the published algorithm description; shares no code with the
``blake3`` extension the library uses. Handles any input length but builds
the chunk tree naively, so keep inputs small.
"""

MASK = 0xFFFFFFFF

IV = (
    0x6A09E667, 0xBB67AE85, 0x3C6EF372, 0xA54FF53A,
    0x510E527F, 0x9B05688C, 0x1F83D9AB, 0x5BE0CD19,
)
MSG_PERMUTATION = (2, 6, 3, 10, 7, 0, 4, 13, 1, 11, 12, 5, 9, 14, 15, 8)

CHUNK_START = 1 << 0
CHUNK_END = 1 << 1
PARENT = 1 << 2
ROOT = 1 << 3
KEYED_HASH = 1 << 4
DERIVE_KEY_CONTEXT = 1 << 5
DERIVE_KEY_MATERIAL = 1 << 6

BLOCK_LEN = 64
CHUNK_LEN = 1024


def _rotr(x, n):
    return ((x >> n) | (x << (32 - n))) & MASK


def _g(s, a, b, c, d, mx, my):
    s[a] = (s[a] + s[b] + mx) & MASK
    s[d] = _rotr(s[d] ^ s[a], 16)
    s[c] = (s[c] + s[d]) & MASK
    s[b] = _rotr(s[b] ^ s[c], 12)
    s[a] = (s[a] + s[b] + my) & MASK
    s[d] = _rotr(s[d] ^ s[a], 8)
    s[c] = (s[c] + s[d]) & MASK
    s[b] = _rotr(s[b] ^ s[c], 7)


def _round(s, m):
    _g(s, 0, 4, 8, 12, m[0], m[1])
    _g(s, 1, 5, 9, 13, m[2], m[3])
    _g(s, 2, 6, 10, 14, m[4], m[5])
    _g(s, 3, 7, 11, 15, m[6], m[7])
    _g(s, 0, 5, 10, 15, m[8], m[9])
    _g(s, 1, 6, 11, 12, m[10], m[11])
    _g(s, 2, 7, 8, 13, m[12], m[13])
    _g(s, 3, 4, 9, 14, m[14], m[15])


def compress(cv, block_words, counter, block_len, flags):
    s = list(cv) + list(IV[:4]) + [
        counter & MASK, (counter >> 32) & MASK, block_len, flags,
    ]
    m = list(block_words)
    for r in range(7):
        _round(s, m)
        if r < 6:
            m = [m[i] for i in MSG_PERMUTATION]
    for i in range(8):
        s[i] ^= s[i + 8]
        s[i + 8] ^= cv[i]
    return s


def _words(block):
    block = block + bytes(BLOCK_LEN - len(block))
    return [int.from_bytes(block[i:i + 4], "little") for i in range(0, 64, 4)]


class _Output:
    def __init__(self, cv, words, counter, block_len, flags):
        self.cv, self.words = cv, words
        self.counter, self.block_len, self.flags = counter, block_len, flags

    def chaining_value(self):
        return compress(self.cv, self.words, self.counter, self.block_len, self.flags)[:8]

    def root_bytes(self, length):
        out = bytearray()
        block_counter = 0
        while len(out) < length:
            s = compress(self.cv, self.words, block_counter, self.block_len,
                         self.flags | ROOT)
            for w in s:
                out += w.to_bytes(4, "little")
            block_counter += 1
        return bytes(out[:length])


def _chunk_output(key_words, chunk, chunk_counter, flags):
    cv = list(key_words)
    blocks = [chunk[i:i + BLOCK_LEN] for i in range(0, len(chunk), BLOCK_LEN)] or [b""]
    for i, block in enumerate(blocks):
        block_flags = flags
        if i == 0:
            block_flags |= CHUNK_START
        if i == len(blocks) - 1:
            block_flags |= CHUNK_END
            return _Output(cv, _words(block), chunk_counter, len(block), block_flags)
        cv = compress(cv, _words(block), chunk_counter, BLOCK_LEN, block_flags)[:8]


def _parent_output(left_cv, right_cv, key_words, flags):
    return _Output(list(key_words), list(left_cv) + list(right_cv), 0, BLOCK_LEN,
                   flags | PARENT)


def _hash(data, key_words, flags, length):
    chunks = [data[i:i + CHUNK_LEN] for i in range(0, len(data), CHUNK_LEN)] or [b""]
    outputs = [_chunk_output(key_words, c, n, flags) for n, c in enumerate(chunks)]
    # left subtree always holds the largest power-of-two number of chunks
    def reduce(nodes):
        if len(nodes) == 1:
            return nodes[0]
        split = 1
        while split * 2 < len(nodes):
            split *= 2
        left = reduce(nodes[:split])
        right = reduce(nodes[split:])
        return _parent_output(left.chaining_value(), right.chaining_value(),
                              key_words, flags)
    return reduce(outputs).root_bytes(length)


def blake3_hash(data, length=32):
    return _hash(bytes(data), IV, 0, length)


def blake3_keyed(key, data, length=32):
    assert len(key) == 32
    key_words = [int.from_bytes(key[i:i + 4], "little") for i in range(0, 32, 4)]
    return _hash(bytes(data), key_words, KEYED_HASH, length)


def blake3_derive_key(context, material, length=32):
    context_key = _hash(context.encode("utf-8"), IV, DERIVE_KEY_CONTEXT, 32)
    key_words = [int.from_bytes(context_key[i:i + 4], "little") for i in range(0, 32, 4)]
    return _hash(bytes(material), key_words, DERIVE_KEY_MATERIAL, length)
