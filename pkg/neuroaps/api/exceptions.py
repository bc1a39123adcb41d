__all__ = ["NeuroApsException", "UsageException", "ConfigException", "DataException",
           "DegenerateInputException", "InvalidInputException", "NoBrainFoundException",
           "BudgetException", "SamplingException", "ShapeException", "FormatException",
           "LengthException", "RegionCodeException", "IntegrityException", "NumericalException"]

"""
================================================================================
EXCEÇÕES: Hierarquia de Erros do NeuroAPS
================================================================================
Todas as exceções do sistema herdam de NeuroApsException.

Cada classe define:
- code: identificador curto, estável e legível por máquina
- exit_code: código de saída usado pela CLI

Códigos de saída:
- 2: erro de uso (flags inválidas, configuração inválida)
- 3: erro de dados ou de formato
- 4: falha numérica (loss não finita, NaN em operações)
"""


class NeuroApsException(Exception):
    code = "error"
    exit_code = 1


class UsageException(NeuroApsException):
    code = "usage"
    exit_code = 2


class ConfigException(UsageException):
    code = "config"


class DataException(NeuroApsException):
    code = "data"
    exit_code = 3


class DegenerateInputException(DataException):
    code = "degenerate-input"


class InvalidInputException(DataException):
    code = "invalid-input"


class NoBrainFoundException(DataException):
    code = "no-brain-found"


class BudgetException(DataException):
    code = "budget"


class SamplingException(DataException):
    code = "sampling"


class ShapeException(DataException):
    code = "shape"


class FormatException(DataException):
    code = "format"


class LengthException(FormatException):
    code = "length"


class RegionCodeException(FormatException):
    code = "region-code"


class IntegrityException(FormatException):
    code = "integrity"


class NumericalException(NeuroApsException):
    code = "numerical"
    exit_code = 4
