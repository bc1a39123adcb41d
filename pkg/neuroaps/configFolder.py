import logging
import os
import pathlib
import shutil

logger = logging.getLogger(__name__)

"""
================================================================================
CLASSE: ConfigFolder
================================================================================
Gerencia a pasta de trabalho do NeuroAPS.

Esta classe fornece métodos para:
- Verificar existência de arquivos de configuração
- Criar estrutura de pastas necessária
- Copiar o config.yaml padrão se não existir

Estrutura de pastas criada:
- config/
  - phantoms/
  - clouds/
  - checkpoints/
  - reports/
  - logs/
"""
class ConfigFolder:

    FOLDERS = ("phantoms", "clouds", "checkpoints", "reports", "logs")

    def __init__(self, configFolderPath):
        """
        Args:
            configFolderPath: Caminho da pasta de configuração (geralmente './config')
        """
        self._rawPath = configFolderPath

    @property
    def path(self):
        return self._rawPath

    def config_file_exists(self, path):
        return os.path.exists(self.get_file_path(path))

    def get_file_path(self, file):
        """
        Obtém caminho completo de um arquivo na pasta de configuração.

        Args:
            file: Nome do arquivo ou caminho relativo

        Returns:
            Caminho completo do arquivo
        """
        return os.path.join(self._rawPath, file)

    def default_config_file(self):
        return os.path.join(os.path.dirname(__file__), "config", "config.yaml")

    def config_file(self):
        """config.yaml da pasta, ou o padrão empacotado se a pasta não tiver um."""
        if self.config_file_exists("config.yaml"):
            return self.get_file_path("config.yaml")
        logger.warning("No config.yaml in %s, using packaged defaults. Run 'neuroaps setup' to create one.",
                       os.path.abspath(self._rawPath))
        return self.default_config_file()

    def check_for_setup(self):
        """
        Returns:
            True se a pasta tem config.yaml e todas as subpastas
        """
        missing = [name for name in ("config.yaml",) + self.FOLDERS if not self.config_file_exists(name)]
        for name in missing:
            logger.debug("Missing %s in %s", name, self._rawPath)
        return not missing

    def copyDefaultFileIfNotExists(self, file):
        if self.config_file_exists(file) is False:
            srcfile = os.path.join(os.path.dirname(__file__), "config", file)
            destfile = os.path.join(self._rawPath, file)
            shutil.copy(srcfile, destfile)

    def create_config_file(self):
        self.copyDefaultFileIfNotExists("config.yaml")
        logger.info("Config file ready in %s", self._rawPath)

    def create_folders(self):
        pathlib.Path(self._rawPath).mkdir(parents=True, exist_ok=True)
        for name in self.FOLDERS:
            pathlib.Path(os.path.join(self._rawPath, name)).mkdir(parents=True, exist_ok=True)
