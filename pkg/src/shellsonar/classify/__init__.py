from .cv import CVReport, MLPClassifier, SVMClassifier, cross_validate, format_cell, stratified_folds
from .mlp import MLPHyper, MLPModel, init_mlp, loss_and_grads, mlp_forward, mlp_train
from .serialize import load_model, save_model
from .svm import SVMModel, decision_function, rbf_kernel, svm_predict, svm_train

__all__ = [
    "CVReport", "MLPClassifier", "MLPHyper", "MLPModel", "SVMClassifier", "SVMModel",
    "cross_validate", "decision_function", "format_cell", "init_mlp", "load_model",
    "loss_and_grads", "mlp_forward", "mlp_train", "rbf_kernel", "save_model",
    "stratified_folds", "svm_predict", "svm_train",
]
