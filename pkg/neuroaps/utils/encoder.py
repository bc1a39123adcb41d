import datetime
from enum import Enum
from json import JSONEncoder

import numpy as np
from pandas import Timestamp


class ComplexEncoder(JSONEncoder):

    def default(self, obj):
        if hasattr(obj, "to_dict") and callable(getattr(obj, "to_dict")):
            return obj.to_dict()
        elif isinstance(obj, Enum):
            return str(obj)
        elif isinstance(obj, np.integer):
            return int(obj)
        elif isinstance(obj, np.floating):
            return float(obj)
        elif isinstance(obj, np.bool_):
            return bool(obj)
        elif isinstance(obj, np.ndarray):
            return obj.tolist()
        elif isinstance(obj, (datetime.datetime, Timestamp)):
            return obj.__str__()
        return super().default(obj)
