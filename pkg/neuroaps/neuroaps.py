"""
Módulo principal do NeuroAPS
Carrega a configuração estática e cria todos os controladores do pipeline.
"""
import logging

from voluptuous import MultipleInvalid

from neuroaps import __codename__, __version__
from neuroaps.api.exceptions import ConfigException
from neuroaps.api.schema import CONFIG_SCHEMA
from neuroaps.configFolder import ConfigFolder
from neuroaps.controller.bench_controller import BenchController
from neuroaps.controller.model_controller import ModelController
from neuroaps.controller.phantom_controller import PhantomController
from neuroaps.controller.preprocess_controller import PreprocessController
from neuroaps.controller.sampler_controller import SamplerController
from neuroaps.controller.trainer_controller import TrainerController
from neuroaps.utils import load_config

logger = logging.getLogger(__name__)

"""
================================================================================
CLASSE PRINCIPAL: NeuroAps
================================================================================
Coordena os componentes do pipeline APS -> NeuroAPS-Net:
- phantom: gera fantomas e manifesto
- preprocess: normalização e máscara do cérebro
- sampler: APS e amostradores de ablação
- model: parâmetros e checkpoints
- trainer: treino e avaliação
- bench: latência, workspace e varreduras
"""
class NeuroAps:

    def __init__(self, configFolder):
        """
        Args:
            configFolder: ConfigFolder (ou caminho da pasta de configuração)
        """
        if not isinstance(configFolder, ConfigFolder):
            configFolder = ConfigFolder(configFolder)
        self.config_folder = configFolder
        self.version = __version__
        self.codename = __codename__
        self.static_config = self.load_static_config()
        logger.debug("NeuroAPS %s (%s) using %s", self.version, self.codename, self.config_folder.path)

        self.phantom = PhantomController(self)
        self.preprocess = PreprocessController(self)
        self.sampler = SamplerController(self)
        self.model = ModelController(self)
        self.trainer = TrainerController(self)
        self.bench = BenchController(self)

    def load_static_config(self):
        path = self.config_folder.config_file()
        document = load_config(path)
        if document is None:
            raise ConfigException("Cannot read configuration file {}".format(path))
        try:
            return CONFIG_SCHEMA(document)
        except MultipleInvalid as e:
            raise ConfigException("Invalid configuration in {}: {}".format(path, e))
