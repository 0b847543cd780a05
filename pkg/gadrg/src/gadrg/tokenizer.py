"""Byte-level tokenizer: one token per UTF-8 byte plus BOS/EOS/PAD."""

PAD_ID = 256
BOS_ID = 257
EOS_ID = 258
VOCAB_SIZE = 259


def encode(text: str, add_bos: bool = False, add_eos: bool = False) -> list[int]:
    ids = list(text.encode("utf-8"))
    if add_bos:
        ids = [BOS_ID] + ids
    if add_eos:
        ids = ids + [EOS_ID]
    return ids


def decode(ids) -> str:
    data = bytes(i for i in ids if i < 256)
    return data.decode("utf-8", errors="ignore")
