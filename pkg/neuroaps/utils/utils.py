from neuroaps.utils.encoder import ComplexEncoder

__all__ = ['load_config', "json_dumps", "atomic_write"]

import json
import logging
import os
import tempfile
from contextlib import contextmanager

import yaml

logger = logging.getLogger(__name__)

"""
================================================================================
UTILITÁRIOS: Funções Auxiliares
================================================================================
Funções utilitárias usadas em todo o pipeline.
"""

def load_config(fname):
    """
    Carrega um arquivo de configuração YAML.

    Args:
        fname: Caminho do arquivo YAML

    Returns:
        Dicionário com dados do arquivo ou None se houver erro

    Usado para carregar:
    - config.yaml (configuração principal)
    - manifestos do conjunto de dados
    """
    try:
        with open(fname, 'rt') as f:
            data = yaml.load(f, Loader=yaml.FullLoader)
        return data
    except (OSError, yaml.YAMLError) as e:
        logger.warning("Cannot load %s: %s", fname, e)
        return None

def json_dumps(obj, indent=None):
    """
    Serializa um objeto Python para JSON usando encoder customizado.

    O ComplexEncoder permite serializar:
    - escalares e arrays numpy
    - Enums
    - objetos com método to_dict()

    Args:
        obj: Objeto a ser serializado

    Returns:
        String JSON
    """
    return json.dumps(obj, cls=ComplexEncoder, indent=indent)

@contextmanager
def atomic_write(path, binary=False):
    """
    Escreve em um arquivo temporário na mesma pasta e renomeia ao final.

    Se o bloco levantar exceção, o arquivo de destino não é tocado.
    """
    folder = os.path.dirname(os.path.abspath(path))
    os.makedirs(folder, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(prefix=".tmp-", dir=folder)
    try:
        with os.fdopen(fd, "wb" if binary else "w", **({} if binary else dict(encoding="utf-8", newline=""))) as f:
            yield f
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise
