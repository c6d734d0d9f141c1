from .evaluate import (
    EvalReport,
    ForestLearner,
    Learner,
    LogisticLearner,
    MajorityLearner,
    cross_validate,
    mae,
)
from .forest import ForestModel, predict, train_forest, vote
from .logistic import LogisticModel, loss_and_grad, train_logistic
from .tree import DecisionTree, Leaf, Split, gini, train_tree

__all__ = [
    "DecisionTree",
    "EvalReport",
    "ForestLearner",
    "ForestModel",
    "Learner",
    "Leaf",
    "LogisticLearner",
    "LogisticModel",
    "MajorityLearner",
    "Split",
    "cross_validate",
    "gini",
    "loss_and_grad",
    "mae",
    "predict",
    "train_forest",
    "train_logistic",
    "train_tree",
    "vote",
]
