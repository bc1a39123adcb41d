from neuroaps.utils.utils import *
