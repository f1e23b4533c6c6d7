from .ensemble import EnsembleFamily, EnsembleModel, ensemble_predict
from .forest import ForestFamily, ForestModel, forest_fit, forest_predict, polynomial_features
from .idw import IdwFamily, IdwModel, NearestNeighborFamily, idw_predict, nearest_neighbor_predict
from .kriging import (
    KrigingFamily,
    KrigingModel,
    VariogramModel,
    empirical_variogram,
    fit_variogram,
    kriging_fit,
    kriging_predict,
)
