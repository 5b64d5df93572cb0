# proxyaudit library: data model, estimators, bias, sensitivity, simulation, utility
