@univariate true
@classLabel false
@data
7,8,9
