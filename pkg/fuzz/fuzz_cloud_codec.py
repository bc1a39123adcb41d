"""Fuzz runner for the APC1 cloud decoder.

See https://github.com/google/atheris for installation instructions. atheris
is an optional extra (pip install neuroaps[fuzz]); the slow acceptance test
replays random inputs through the same target without it.
"""

import sys

import atheris

with atheris.instrument_imports():
  from neuroaps.api.exceptions import DataException
  from neuroaps.utils.cloud_codec import decode_cloud, encode_cloud


def TestDecodeCloud(data):
  try:
    cloud = decode_cloud(data)
  except DataException:
    return
  # anything the decoder accepts must re-encode to the same bytes
  assert encode_cloud(cloud) == bytes(data)


if __name__ == '__main__':
  atheris.Setup(sys.argv, TestDecodeCloud)
  atheris.Fuzz()
