"""Traditional codecs: Huffman, lossless predictive and DCT transform coding."""

from .container import HEADER_SIZE, CodecError, CodecId, EncodedBlob
from .dct import dct_decode, dct_encode, quant_table, rate_distortion_sweep
from .huffman import HuffmanError, huffman_decode, huffman_encode
from .predictive import (huffman_image_decode, huffman_image_encode,
                         predictive_decode, predictive_encode)

__all__ = [
    "HEADER_SIZE", "CodecError", "CodecId", "EncodedBlob",
    "dct_decode", "dct_encode", "quant_table", "rate_distortion_sweep",
    "HuffmanError", "huffman_decode", "huffman_encode",
    "huffman_image_decode", "huffman_image_encode",
    "predictive_decode", "predictive_encode",
    "encode_image", "decode_blob",
]


def encode_image(image, codec: str, quality: int = 75) -> EncodedBlob:
    cid = CodecId.parse(codec)
    if cid is CodecId.HUFFMAN:
        return huffman_image_encode(image)
    if cid is CodecId.PREDICTIVE:
        return predictive_encode(image)
    if cid is CodecId.DCT:
        return dct_encode(image, quality)
    raise CodecError("ae_embedding blobs need a trained model; use the autoencoder package")


def decode_blob(blob: EncodedBlob):
    if blob.codec_id is CodecId.HUFFMAN:
        return huffman_image_decode(blob)
    if blob.codec_id is CodecId.PREDICTIVE:
        return predictive_decode(blob)
    if blob.codec_id is CodecId.DCT:
        return dct_decode(blob)
    raise CodecError("ae_embedding blobs need a trained model; use the autoencoder package")
