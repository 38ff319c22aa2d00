from .dataset import DomainDataset, MultiDomainCollection, TieSet, UNLABELED, NO_TIE
