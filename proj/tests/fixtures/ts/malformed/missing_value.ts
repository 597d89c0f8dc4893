@problemName a
@univariate true
@classLabel false
@data
1,?,3
